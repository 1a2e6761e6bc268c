"""Command-line entry point: ``excursus <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from . import decomp, densities as dens, eigen, harness, pathsim, ppp, vervaat
from .rng import default_threads
from .spec import SpecError, resolve_spec


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Optional[str], columns: Dict[str, Sequence]):
    """Write equal-length columns with a header row (stdout when ``path`` is None)."""
    names = list(columns)
    rows = zip(*(columns[k] for k in names))
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    finally:
        if path:
            fh.close()


def write_json(path: Optional[str], obj: dict):
    text = json.dumps(obj, indent=2, default=harness._jsonable)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def read_path_csv(path: str) -> np.ndarray:
    """Values of a single path from a CSV with columns ``t, x``."""
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "x" not in rows[0]:
        raise SpecError(f"{path}: expected columns t, x")
    return np.array([float(r["x"]) for r in rows])


# ---------------------------------------------------------------------------
# commands


def cmd_eigen(a) -> int:
    spec = resolve_spec(a.spec)
    pair = eigen.solve_eigenfunctions(spec, a.alpha)
    tab = pair.table()
    if a.lebesgue:
        for k in ("g1_plus", "g2_plus"):
            tab[k] = tab[k] * spec.scale_derivative(tab["x"])
    write_csv(a.out, tab)
    print(f"wronskian {pair.W:.12g} (relative deviation {pair.wronskian_deviation:.2e})", file=sys.stderr)
    return 0


def cmd_fpt(a) -> int:
    spec = resolve_spec(a.spec)
    t = np.linspace(a.tmax / a.n_t, a.tmax, a.n_t)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", dens.InversionWarning)
        if a.kind == "passage":
            f = dens.first_passage_density(spec, t, a.x, a.y)
        else:
            f = dens.entrance_density(spec, t, np.full_like(t, a.x), a.y)
            if a.lebesgue:
                f = f * spec.speed_density(np.array(a.x))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_csv(a.out, {"t": t, "f": f})
    return 0


def cmd_simulate(a) -> int:
    spec = resolve_spec(a.spec)
    rng = np.random.default_rng(a.seed)
    batch = pathsim.simulate_paths(spec, a.x0, a.dt, a.horizon, a.n, rng, step_minima=a.excursions is not None)
    ids, ts, xs = [], [], []
    for i, p in enumerate(batch.paths()):
        ids.append(np.full(p.values.size, i))
        ts.append(p.times)
        xs.append(p.values)
    write_csv(a.out, {"path_id": np.concatenate(ids), "t": np.concatenate(ts), "x": np.concatenate(xs)})
    if a.excursions:
        cols = {"path_id": [], "u": [], "level": [], "duration": []}
        for i, p in enumerate(batch.paths()):
            for r in pathsim.extract_excursions(p, a.min_duration):
                cols["path_id"].append(i)
                cols["u"].append(r.u)
                cols["level"].append(r.level)
                cols["duration"].append(r.duration)
        write_csv(a.excursions, cols)
    return 0


def cmd_levy(a) -> int:
    spec = resolve_spec(a.spec)
    if a.dt > a.eps:
        raise SpecError("dt must not exceed eps")
    rep = ppp.verify_levy_system(spec, a.x, a.z, a.f, a.eps, a.n, a.seed, dt=a.dt, T=a.T, alpha=a.alpha,
                                 height=a.height, threads=a.threads)
    write_json(a.report, rep.to_dict())
    return 0 if rep.passed() else 1


def cmd_williams(a) -> int:
    spec = resolve_spec(a.spec)
    res = decomp.williams_batch(spec, a.x, a.n, a.seed, dt=a.dt, threads=a.threads)
    write_csv(a.out, res)
    return 0


def cmd_local(a) -> int:
    spec = resolve_spec(a.spec)
    rep = decomp.verify_local_decomposition(spec, a.b, a.t, a.n, a.seed, dt=a.dt, threads=a.threads)
    write_json(a.report, rep.to_dict())
    return 0 if rep.passed else 1


def cmd_vervaat(a) -> int:
    rng = np.random.default_rng(a.seed)
    if a.input:
        vals = read_path_csv(a.input)
        src = vervaat.LoopPath(vals)
        out = (vervaat.vervaat_forward(src) if a.direction == "fwd"
               else vervaat.vervaat_inverse(src, a.u if a.u is not None else rng.random()))
        write_csv(a.out, {"t": out.times, "x": out.values})
        return 0
    if a.direction == "fwd":
        src = vervaat.sample_bridge01(a.n_steps, rng, a.n)
        out = vervaat.vervaat_forward(src)
    else:
        src = vervaat.sample_excursion01(a.n_steps, rng, a.n)
        u = rng.integers(1, a.n_steps, size=a.n) / a.n_steps
        out = vervaat.vervaat_inverse(src, u)
    t = np.arange(a.n_steps + 1) / a.n_steps
    write_csv(a.out, {"path_id": np.repeat(np.arange(a.n), t.size), "t": np.tile(t, a.n), "x": out.ravel()})
    return 0


def _manifest_exit(man: harness.RunManifest, report: Optional[str]) -> int:
    for c in man.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.seconds:.1f} s)", file=sys.stderr)
    if report is None:
        write_json(None, man.to_dict())
    return 0 if man.passed else 1


def cmd_verify(a) -> int:
    cfg = harness.ExperimentConfig(spec=a.spec, seed=a.seed, n_scale=a.n_scale, threads=a.threads,
                                   checks=a.checks or ["all"], report=a.report)
    return _manifest_exit(harness.run(cfg), a.report)


def cmd_suite(a) -> int:
    man = harness.suite(a.name, seed=a.seed, threads=a.threads, report=a.report)
    return _manifest_exit(man, a.report)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="excursus", description="Excursion theory for one-dimensional diffusions.")
    p.add_argument("--threads", type=int, default=default_threads(), help="worker threads (default $EXCURSUS_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eigen", help="increasing/decreasing eigenfunctions on the grid")
    s.add_argument("--spec", required=True)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--lebesgue", action="store_true", help="report derivatives in x instead of in scale")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eigen)

    s = sub.add_parser("fpt", help="first-passage (or entrance) density on a time grid")
    s.add_argument("--spec", required=True)
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--y", type=float, required=True)
    s.add_argument("--tmax", type=float, default=4.0)
    s.add_argument("--n-t", type=int, default=200)
    s.add_argument("--kind", choices=("passage", "entrance"), default="passage")
    s.add_argument("--lebesgue", action="store_true", help="entrance density per unit length instead of per unit m")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fpt)

    s = sub.add_parser("simulate", help="sample paths (and their excursions above the minimum)")
    s.add_argument("--spec", required=True)
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s.add_argument("--excursions")
    s.add_argument("--min-duration", type=float, default=0.0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("levy-verify", help="compare both sides of the excursion compensation identity")
    s.add_argument("--spec", required=True)
    s.add_argument("--x", type=float, default=0.0)
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--z", choices=ppp.Z_CHOICES, default="exp")
    s.add_argument("--f", choices=ppp.F_CHOICES, default="duration")
    s.add_argument("--T", type=float, default=6.0)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--height", type=float, default=0.5)
    s.add_argument("--report")
    s.set_defaults(func=cmd_levy)

    s = sub.add_parser("williams", help="global minimum, its time and lifetime of decomposed paths")
    s.add_argument("--spec", required=True)
    s.add_argument("--x", type=float, default=0.0)
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_williams)

    s = sub.add_parser("local-decomp", help="check the law of the minimum before a fixed time")
    s.add_argument("--spec", default="brownian")
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report")
    s.set_defaults(func=cmd_local)

    s = sub.add_parser("vervaat", help="bridge <-> excursion cyclic-shift transforms")
    s.add_argument("--direction", choices=("fwd", "inv"), required=True)
    s.add_argument("--n-steps", type=int, default=1000)
    s.add_argument("--n", type=int, default=10)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--input", help="transform a single path from a CSV with columns t, x")
    s.add_argument("--u", type=float, help="rotation time for --direction inv with --input")
    s.add_argument("--out")
    s.set_defaults(func=cmd_vervaat)

    s = sub.add_parser("verify", help="run named checks (or 'all') and emit a manifest")
    s.add_argument("checks", nargs="*")
    s.add_argument("--spec", default="brownian")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-scale", type=float, default=1.0)
    s.add_argument("--report")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("suite", help="acceptance (full size) or smoke (a tenth of the samples)")
    s.add_argument("name", choices=("acceptance", "smoke"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report")
    s.set_defaults(func=cmd_suite)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        return a.func(a)
    except (SpecError, ValueError) as exc:
        print(f"excursus {a.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
