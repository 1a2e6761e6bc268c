"""Experiment configs, the check registry and run manifests.

Each check is a function ``(config) -> CheckResult``; sample sizes are
multiplied by ``config.n_scale`` so that the smoke suite reuses the
acceptance checks at a tenth of the work.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import decomp, densities as dens, eigen, pathsim, ppp, vervaat
from .spec import SpecError, brownian, bessel3, absorbed_brownian, resolve_spec


@dataclass
class ExperimentConfig:
    spec: str = "brownian"
    alpha: float = 1.0
    dt: float = 1e-3
    horizon: float = 1.0
    eps: float = 0.01
    n: Optional[int] = None
    seed: int = 0
    n_scale: float = 1.0
    threads: Optional[int] = None
    checks: List[str] = field(default_factory=lambda: ["all"])
    report: Optional[str] = None

    def validate(self):
        if self.seed is None:
            raise SpecError("a seed is required for sampling checks")
        if self.dt <= 0 or self.eps < self.dt:
            raise SpecError("need 0 < dt <= eps")
        if not self.n_scale > 0:
            raise SpecError("n_scale must be positive")
        resolve_spec(self.spec)
        unknown = [c for c in self.checks if c != "all" and c not in CHECKS]
        if unknown:
            raise SpecError(f"unknown checks {unknown}; valid: all, {', '.join(CHECKS)}")
        return self

    def size(self, default: int) -> int:
        n = self.n if self.n is not None else default
        return max(30, int(round(n * self.n_scale)))


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict
    seconds: float = 0.0
    stage: str = ""


@dataclass
class RunManifest:
    config: dict
    version: str
    wall_time: float
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"config": self.config, "version": self.version, "wall_time": self.wall_time,
                "passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def code_version() -> str:
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


# ---------------------------------------------------------------------------
# checks


def check_resolvent_oracle(cfg: ExperimentConfig) -> CheckResult:
    """Standard BM, alpha = 1: numeric u(x, y) vs exp(-sqrt(2)|x - y|) / (2 sqrt 2)."""
    pair = eigen.solve_eigenfunctions(brownian(), 1.0)
    g = np.linspace(-2, 2, 41)
    X, Y = np.meshgrid(g, g)
    u = eigen.resolvent_density(pair, X, Y)
    exact = np.exp(-math.sqrt(2) * np.abs(X - Y)) / (2 * math.sqrt(2))
    err = float(np.max(np.abs(u / exact - 1)))
    return CheckResult("resolvent_oracle", err <= 1e-4, {"max_rel_error": err, "tolerance": 1e-4})


def check_hitting_laplace(cfg: ExperimentConfig) -> CheckResult:
    """BM drift 0.5, x = 1, y = 0, alpha = 1: solver, closed form and Monte Carlo."""
    mu, alpha, x, y = 0.5, 1.0, 1.0, 0.0
    spec = brownian(mu)
    solver = eigen.hitting_laplace(eigen.solve_eigenfunctions(spec, alpha), x, y)
    exact = math.exp(-(mu + math.sqrt(mu * mu + 2 * alpha)) * (x - y))
    rel = abs(solver / exact - 1)
    n = cfg.size(100_000)
    mc, se = pathsim.hitting_laplace_mc(spec, x, y, alpha, 1e-3, n, np.random.default_rng([cfg.seed, 2]))
    gap = abs(mc - exact)
    ok = rel <= 1e-4 and gap <= 3 * se + 0.01 * exact
    return CheckResult("hitting_laplace", ok, {"solver": solver, "closed_form": exact, "solver_rel_error": rel,
                                               "mc": mc, "mc_se": se, "n": n, "mc_gap": gap,
                                               "mc_allowance": 3 * se + 0.01 * exact})


def check_entrance_identity(cfg: ExperimentConfig) -> CheckResult:
    """Entrance density from the killed kernel vs the first-passage density, 10 x 10 grid."""
    spec = resolve_spec(cfg.spec) if cfg.spec.startswith(("brownian", "bm-drift", "killed-bm")) else brownian()
    T, X = np.meshgrid(np.linspace(0.1, 2.0, 10), np.linspace(0.1, 3.0, 10))
    a = dens.entrance_density(spec, T, X, 0.0, method="passage")
    b = dens.entrance_density(spec, T, X, 0.0, method="kernel")
    err = float(np.max(np.abs(b / a - 1)))
    return CheckResult("entrance_identity", err <= 1e-3, {"max_rel_error": err, "tolerance": 1e-3, "spec": spec.name})


def check_levy_system(cfg: ExperimentConfig) -> CheckResult:
    """BM drift 0.5 from 0, Z = e^{-u}, F = 1{zeta > 0.01}: both sides of the compensation identity."""
    n = cfg.size(100_000)
    rep = ppp.verify_levy_system(brownian(0.5), 0.0, "exp", "duration", 0.01, n, cfg.seed, dt=1e-3,
                                 threads=cfg.threads)
    return CheckResult("levy_system", rep.passed(), rep.to_dict())


def check_williams_minimum(cfg: ExperimentConfig) -> CheckResult:
    """BM drift 0.5 from 0: -gamma ~ Exp(1)."""
    n = cfg.size(10_000)
    rep = decomp.verify_minimum_law(brownian(0.5), 0.0, n, cfg.seed)
    return CheckResult("williams_minimum", rep.passed(), rep.to_dict())


def check_williams_laplace(cfg: ExperimentConfig) -> CheckResult:
    """Empirical P(e^{-rho}) from the decomposition vs quadrature with g2 and -dr/r."""
    n = cfg.size(10_000)
    res = decomp.verify_minimum_laplace(brownian(0.5), 0.0, n, cfg.seed, alpha=1.0, dt=1e-3, threads=cfg.threads)
    return CheckResult("williams_laplace", bool(res["passed"]), res)


def check_local_decomposition(cfg: ExperimentConfig) -> CheckResult:
    """Standard BM, t = 1: triple histogram chi-square and the two marginal KS tests."""
    n = cfg.size(100_000)
    rep = decomp.verify_local_decomposition(brownian(), 0.0, 1.0, n, cfg.seed, dt=1e-3, threads=cfg.threads)
    return CheckResult("local_decomposition", rep.passed, rep.to_dict())


def check_vervaat_forward(cfg: ExperimentConfig) -> CheckResult:
    """Transformed bridge at t = 1/2 vs the excursion marginal (continuous-time minimum).

    The grid-minimum variant is reported alongside.
    """
    n = cfg.size(10_000)
    rep = vervaat.verify_forward(1000, n, cfg.seed, refined=True)
    plain = vervaat.verify_forward(1000, n, cfg.seed, refined=False)
    return CheckResult("vervaat_forward", rep.passed(), {"refined": rep.to_dict(), "grid_minimum": plain.to_dict()})


def check_vervaat_round_trip(cfg: ExperimentConfig) -> CheckResult:
    n = cfg.size(10_000)
    res = vervaat.verify_round_trip(1000, n, cfg.seed)
    return CheckResult("vervaat_round_trip", bool(res["passed"]), res)


def _property_suite(seed: int) -> Dict[str, dict]:
    out = {}
    specs = [brownian(), brownian(0.5), brownian(0.3, 0.2), bessel3(), absorbed_brownian()]
    devs = {s.name: eigen.solve_eigenfunctions(s, 1.0).wronskian_deviation for s in specs}
    out["wronskian"] = {"deviation": devs, "passed": max(devs.values()) <= 1e-6}

    pair = eigen.solve_eigenfunctions(brownian(0.5), 1.0)
    g = np.linspace(-2, 2, 21)
    X, Y = np.meshgrid(g, g)
    u = eigen.resolvent_density(pair, X, Y)
    asym = float(np.max(np.abs(u - u.T) / u))
    out["resolvent_symmetry"] = {"max_rel_asymmetry": asym, "passed": asym <= 1e-10}

    b = brownian()
    p = eigen.solve_eigenfunctions(b, 1.0)
    f = lambda z: np.exp(-z ** 2)
    errs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        U = eigen.resolvent_apply(p, f)
        for x, y in ((0.5, 0.0), (-1.0, 0.3), (1.2, 1.0)):
            V = dens.killed_resolvent_apply(b, 1.0, f, y, x)
            W = eigen.excursion_resolvent(p, y, f)
            lhs = float(U(x))
            errs.append(abs(V + float(eigen.resolvent_density(p, x, y)) * W - lhs) / lhs)
    out["splitting"] = {"max_rel_error": max(errs), "passed": max(errs) <= 1e-3}

    rng = np.random.default_rng([seed, 31])
    batch = pathsim.simulate_paths(brownian(0.5), 0.0, 1e-3, 2.0, 50, rng, step_minima=True)
    mono, disjoint = True, True
    for path in batch.paths():
        mf = pathsim.running_minimum(path, brownian(0.5), use_step_min=True)
        mono &= bool(np.all(np.diff(mf.C) >= 0))
        recs = pathsim.extract_excursions(path, 1e-3)
        for r1, r2 in zip(recs, recs[1:]):
            disjoint &= r1.u + r1.duration <= r2.u + 1e-12
    out["C_monotone"] = {"passed": mono}
    out["excursion_disjoint"] = {"passed": disjoint}

    law = decomp.BridgeLaw(decomp.HAT, 0.0, 1.0, 0.5)
    paths = decomp.sample_bridges(b, law, 0.05, 200, rng)
    rev = decomp.sample_bridges(b, decomp.BridgeLaw(decomp.REVERSED, 0.0, 1.0, 0.5), 0.05, 200, rng)
    loops = vervaat.sample_excursion01(100, rng, 200)
    exact = (np.all(paths[:, 0] == 0.0) and np.all(paths[:, -1] == 0.5) and np.all(paths[:, 1:-1] > 0)
             and np.all(rev[:, 0] == 0.5) and np.all(rev[:, -1] == 0.0)
             and np.all(loops[:, 0] == 0.0) and np.all(loops[:, -1] == 0.0))
    out["bridge_endpoints"] = {"passed": bool(exact)}
    return out


def check_properties(cfg: ExperimentConfig) -> CheckResult:
    res = _property_suite(cfg.seed)
    return CheckResult("properties", all(v["passed"] for v in res.values()), res)


def check_bridge_covariance(cfg: ExperimentConfig) -> CheckResult:
    res = vervaat.verify_bridge_covariance(1000, cfg.size(10_000), cfg.seed)
    return CheckResult("bridge_covariance", abs(res["var_z"]) <= 3 and abs(res["cov_z"]) <= 3, res)


def check_excursion_marginal(cfg: ExperimentConfig) -> CheckResult:
    rng = np.random.default_rng([cfg.seed, 24])
    e = vervaat.sample_excursion01(1000, rng, cfg.size(10_000))
    from .stats import ks_test
    rep = ks_test(e[:, 500], lambda x: vervaat.excursion_marginal_cdf(0.5, x))
    return CheckResult("excursion_marginal", rep.passed() and bool(np.all(e[:, 1:-1] > 0)), rep.to_dict())


# acceptance criteria in order, then the extra checks of the default menu
ACCEPTANCE: Dict[str, Callable[[ExperimentConfig], CheckResult]] = {
    "resolvent_oracle": check_resolvent_oracle,
    "hitting_laplace": check_hitting_laplace,
    "entrance_identity": check_entrance_identity,
    "levy_system": check_levy_system,
    "williams_minimum": check_williams_minimum,
    "williams_laplace": check_williams_laplace,
    "local_decomposition": check_local_decomposition,
    "vervaat_forward": check_vervaat_forward,
    "vervaat_round_trip": check_vervaat_round_trip,
    "properties": check_properties,
}
CHECKS: Dict[str, Callable[[ExperimentConfig], CheckResult]] = dict(
    ACCEPTANCE, bridge_covariance=check_bridge_covariance, excursion_marginal=check_excursion_marginal)

# checks that exercise standard Brownian motion, bridges and excursions
BROWNIAN_MENU = ("resolvent_oracle", "entrance_identity", "local_decomposition", "vervaat_forward",
                 "vervaat_round_trip", "bridge_covariance", "excursion_marginal")


def _selected(cfg: ExperimentConfig) -> List[str]:
    if "all" in cfg.checks:
        kind = cfg.spec.partition(":")[0]
        return list(BROWNIAN_MENU) if kind == "brownian" else list(CHECKS)
    return list(dict.fromkeys(cfg.checks))


def run(config: ExperimentConfig) -> RunManifest:
    """Run the selected checks; every selected check appears once in the manifest."""
    config.validate()
    t0 = time.time()
    results = []
    for name in _selected(config):
        t = time.time()
        try:
            res = CHECKS[name](config)
        except Exception as exc:  # surface the failing stage, keep the other checks
            res = CheckResult(name, False, {"error": f"{type(exc).__name__}: {exc}"}, stage=name)
        res.seconds = time.time() - t
        results.append(res)
    man = RunManifest(asdict(config), code_version(), time.time() - t0, results)
    if config.report:
        with open(config.report, "w") as fh:
            fh.write(man.to_json())
    return man


def suite(name: str, *, seed: int = 0, threads: Optional[int] = None, report: Optional[str] = None) -> RunManifest:
    """``acceptance`` runs every acceptance criterion at full size, ``smoke`` at a tenth."""
    if name not in ("acceptance", "smoke"):
        raise SpecError("suite must be 'acceptance' or 'smoke'")
    cfg = ExperimentConfig(spec="bm-drift:mu=0.5", seed=seed, threads=threads, checks=list(ACCEPTANCE),
                           n_scale=1.0 if name == "acceptance" else 0.1, report=report)
    return run(cfg)
