"""Excursions above the minimum as a point process in the level variable.

Read in the level variable, excursions above the running minimum form a
Poisson point process with intensity ``ds(y) n_up_y(d omega)`` stopped at the
first excursion that never returns.  :func:`sample_excursion_process` samples
it directly, restricted to excursions lasting longer than ``eps``;
:func:`verify_levy_system` checks the compensator identity against paths.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np
from scipy import integrate

from . import densities as dens
from .eigen import NotTransientError, ruin_function, solve_eigenfunctions, escape_rate
from .pathsim import Path, bridge_maximum, excursion_durations_refined, new_minimum_steps, simulate_paths
from .rng import map_blocks
from .spec import DiffusionSpec
from .stats import Welford, z_score


@dataclass(frozen=True, eq=False)
class LevelPoint:
    """One excursion of the level-indexed process.

    ``start`` is the excursion's position at age ``eps`` (``nan`` for the
    escaping one); ``excursion`` holds the simulated remainder when requested.
    """

    level: float
    start: float
    escaped: bool
    excursion: Optional[Path] = None


class _Intensity:
    """``lam(y) = n_up_y(zeta > eps) s'(y)`` per unit level, tabulated lazily on a grid."""

    def __init__(self, spec: DiffusionSpec, eps: float, step: float):
        self.spec, self.eps, self.step = spec, eps, step
        self.cache = {}

    def __call__(self, y: float) -> float:
        key = round(y / self.step)
        if key not in self.cache:
            yy = key * self.step
            lo = self.spec.interval.lower
            if np.isfinite(lo) and yy <= lo:
                self.cache[key] = 0.0
            else:
                tail = dens.excursion_tail_mass(self.spec, yy, self.eps)
                self.cache[key] = tail * float(self.spec.scale_derivative(np.array(yy)))
        return self.cache[key]

    def band_bound(self, top: float, bottom: float) -> float:
        k0, k1 = math.ceil(top / self.step), math.floor(bottom / self.step)
        vals = [self(k * self.step) for k in range(k1, k0 + 1)]
        return 1.02 * max(vals)

    def value(self, y: float) -> float:
        """Linear interpolation between grid nodes."""
        k = math.floor(y / self.step)
        w = y / self.step - k
        return (1 - w) * self(k * self.step) + w * self((k + 1) * self.step)


def _start_sampler(spec: DiffusionSpec, y: float, eps: float, rf, n_grid: int = 600):
    """Grid and CDF of the start density ``q_up(eps; z) r(z) m'(z)`` above ``y``."""
    sig = float(np.max(spec.sigma(np.array([y, y + 1.0]))))
    drift = float(abs(spec.drift(np.array(y))))
    width = drift * eps + 12.0 * sig * math.sqrt(eps)
    top = min(y + width, spec.window[1])
    z = np.linspace(y, top, n_grid)[1:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", dens.InversionWarning)
        q = dens.passage_density_field(spec, eps, z, y)
    w = q * spec.speed_density(z) * rf.r(z)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(z))])
    return z, cdf / cdf[-1]


def sample_excursion_process(
    spec: DiffusionSpec,
    x: float,
    eps: float,
    rng: np.random.Generator,
    *,
    y_min: Optional[float] = None,
    band: float = 0.25,
    dt: Optional[float] = None,
    fragments: bool = False,
    fragment_horizon: float = 5.0,
) -> List[LevelPoint]:
    """Sample the eps-observable excursions above the minimum, indexed by level.

    Levels are generated downward from ``x`` by thinning a band-wise constant
    dominating intensity; each point escapes with probability
    ``(-r^+/r) / n_up_y(zeta > eps)`` and the process stops there.  Returning
    excursions start at age ``eps`` from ``q_up(eps; z) r(z) / r(y)`` and, if
    ``fragments`` is set, continue as the process conditioned to hit ``y``.
    """
    try:
        rf = ruin_function(spec)
    except NotTransientError:
        if y_min is None:
            raise
        rf = ruin_function(spec, strict=False)
    if fragments and dt is None:
        raise ValueError("dt is required to simulate fragments")
    if dt is not None and eps < dt:
        raise ValueError("eps must be at least the simulator dt")
    key = ("level-intensity", float(eps), band / 8.0)
    if key not in spec._cache:
        spec._cache[key] = _Intensity(spec, eps, band / 8.0)
    lam = spec._cache[key]
    floor = spec.window[0] if y_min is None else y_min
    points: List[LevelPoint] = []
    top = float(x)
    while True:
        bottom = top - band
        bound = lam.band_bound(top, bottom)
        y = top
        while True:
            y -= rng.exponential() / bound if bound > 0 else math.inf
            if y < bottom:
                break
            if y < floor:
                if y_min is None:
                    raise RuntimeError("level process left the working window before escaping; widen the window")
                return points
            lv = lam.value(y)
            if rng.random() * bound > lv:
                continue
            kappa = float(escape_rate(rf, y)) * float(spec.scale_derivative(np.array(y))) if rf.transient else 0.0
            if rng.random() * lv < kappa:
                frag = None
                if fragments:
                    from .decomp import sample_conditioned_up
                    frag = sample_conditioned_up(spec, y, fragment_horizon, rng, dt=dt)
                points.append(LevelPoint(y, math.nan, True, frag))
                return points
            z, cdf = _start_sampler(spec, y, eps, rf)
            start = float(np.interp(rng.random(), cdf, z))
            frag = None
            if fragments:
                from .decomp import sample_conditioned_down
                frag = sample_conditioned_down(spec, start, y, rng, dt=dt, rf=rf)
                frag = Path(eps, frag.dt, frag.values, eps + frag.lifetime, frag.absorbed, frag.killed, frag.exited)
            points.append(LevelPoint(y, start, False, frag))
        top = bottom
        if top < floor:
            if y_min is None:
                raise RuntimeError("level process left the working window before escaping; widen the window")
            return points


# ---------------------------------------------------------------------------
# Levy-system verification

Z_CHOICES = ("exp", "indicator")
F_CHOICES = ("duration", "laplace", "height", "zero")


@dataclass(frozen=True)
class LevyReport:
    lhs: float
    se_lhs: float
    rhs: float
    se_rhs: float
    rhs_quadrature: Optional[float]
    z_score: float
    n: int
    z_choice: str
    f_choice: str

    def to_dict(self) -> dict:
        return asdict(self)

    def passed(self, k: float = 3.0) -> bool:
        return abs(self.z_score) <= k


def _excursion_measure(spec: DiffusionSpec, f_choice: str, eps: float, alpha: float, height: float):
    """``y -> n_up_y(F)`` per unit scale for the F menu."""
    if f_choice == "zero":
        return lambda y: 0.0
    if f_choice == "duration":
        return lambda y: dens.excursion_tail_mass(spec, y, eps)
    if f_choice == "height":
        if not spec.kill_free:
            raise ValueError("the sup-height functional is only available without killing")
        return lambda y: 1.0 / float(spec.scale(np.array(y + height)) - spec.scale(np.array(y)))
    if f_choice == "laplace":
        pair = solve_eigenfunctions(spec, alpha)

        def meas(y):
            mu = abs(float(spec.drift(np.array(y))))
            top = min(y + mu * eps + 40 * math.sqrt(eps) * float(spec.sigma(np.array(y))), spec.window[1])
            z = np.linspace(y, top, 2001)[1:]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", dens.InversionWarning)
                q = dens.passage_density_field(spec, eps, z, y)
            ratio = np.exp(pair.log_g2(z) - pair.log_g2(y))
            vals = np.concatenate([[0.0], q * spec.speed_density(z) * ratio])
            return math.exp(-alpha * eps) * float(integrate.simpson(vals, x=np.concatenate([[y], z])))
        return meas
    raise ValueError(f"unknown F choice {f_choice!r}; valid: {', '.join(F_CHOICES)}")


def _tabulate(fn, lo: float, hi: float, n: int = 97):
    """Interpolate ``fn`` on a grid, in log space when it is positive (exact for exponentials)."""
    ys = np.linspace(lo, hi, n)
    vals = np.array([fn(v) for v in ys])
    if np.all(vals > 0):
        lv = np.log(vals)
        return lambda y: np.exp(np.interp(y, ys, lv))
    return lambda y: np.interp(y, ys, vals)


def levy_rhs_quadrature(spec: DiffusionSpec, x: float, z_choice: str, T: float, nF) -> Optional[float]:
    """``int_{y<x} P^x[Z_{T_y}; T_y < inf] n_up_y(F) ds(y)`` for Brownian presets.

    The inner time integral runs on a logarithmic grid; the outer level
    integral is adaptive quadrature on ``]-inf, x[``.
    """
    if not dens._brownian_closed(spec, x, x - 1.0):
        return None
    lt = np.linspace(math.log(1e-10), math.log(T), 4001)
    tt = np.exp(lt)
    disc = np.exp(-tt) if z_choice == "exp" else np.ones_like(tt)

    def inner(y):
        f = dens.first_passage_density(spec, tt, x, y)
        return float(integrate.trapezoid(disc * f * tt, lt))

    lo = spec.interval.lower
    def integrand(d):  # d = x - y > 0
        y = x - d
        return inner(y) * nF(y) * float(spec.scale_derivative(np.array(y)))
    # beyond this distance the passage before T has probability below 1e-30
    reach = abs(spec.mu) * T + 12.0 * math.sqrt(T) + 1.0
    upper = min(x - lo, reach) if np.isfinite(lo) else reach
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        val, _ = integrate.quad(integrand, 0.0, upper, limit=400, points=[0.1 * upper, 0.5 * upper])
    return val


def verify_levy_system(
    spec: DiffusionSpec,
    x: float,
    z_choice: str = "exp",
    f_choice: str = "duration",
    eps: float = 0.01,
    n: int = 100_000,
    seed: int = 0,
    *,
    dt: float = 1e-3,
    T: float = 6.0,
    alpha: float = 1.0,
    height: float = 0.5,
    threads: Optional[int] = None,
    block: int = 2000,
) -> LevyReport:
    """Compare ``P^x sum_{u in G} Z_u F(e^u)`` with its compensator.

    Z menu: ``exp`` (``e^{-u} 1{u < T}``) and ``indicator`` (``1{u < T}``).
    F menu: ``duration`` (``1{zeta > eps}``), ``laplace``
    (``e^{-alpha zeta} 1{zeta > eps}``), ``height`` (``1{sup > h}``), ``zero``.

    The left side sums, over simulated paths, every step where the bridge
    minimum sets a new running minimum; an excursion starting in step ``i``
    and ending in step ``j`` has duration ``(j - i) dt``, with weight 1/2 when
    that equals ``eps`` exactly (midpoint rule for the unresolved offsets).
    The right side is estimated on the same paths as
    ``sum Z n_up_H(F) dC`` and, for Brownian presets, by quadrature.
    """
    if z_choice not in Z_CHOICES:
        raise ValueError(f"unknown Z choice {z_choice!r}; valid: {', '.join(Z_CHOICES)}")
    if f_choice not in F_CHOICES:
        raise ValueError(f"unknown F choice {f_choice!r}; valid: {', '.join(F_CHOICES)}")
    if eps < dt - 1e-15:
        raise ValueError("eps must be at least dt")
    nF = _excursion_measure(spec, f_choice, eps, alpha, height)
    extra = eps + 2 * dt
    if f_choice == "laplace":
        extra += 14.0 / alpha
    if f_choice == "height":
        extra += 4.0
    horizon = T + extra
    k_eps = int(round(eps / dt))
    lo_tab = max(x - 12.0, spec.window[0])
    nF_tab = _tabulate(nF, lo_tab, x)

    def block_fn(b, size, rng):
        batch = simulate_paths(spec, x, dt, horizon, size, rng, step_minima=True)
        vals, smin = batch.values, batch.step_min
        m = smin.shape[1]
        smin = np.where(np.isnan(smin), np.inf, smin)
        vv = np.where(np.isnan(vals), np.inf, vals)
        new = new_minimum_steps(vv, smin, x0=x)
        d = excursion_durations_refined(new, dt)
        tm = (np.arange(m) + 0.5) * dt
        Z = (np.exp(-tm) if z_choice == "exp" else np.ones(m)) * (tm < T)
        if f_choice == "zero":
            Fw = np.zeros_like(d, dtype=float)
        elif f_choice == "duration":
            Fw = np.where(d > k_eps, 1.0, np.where(d == k_eps, 0.5, 0.0))
        elif f_choice == "laplace":
            Fw = np.where(d > k_eps, 1.0, np.where(d == k_eps, 0.5, 0.0)) * np.where(d < m, np.exp(-alpha * d * dt), 0.0)
        else:
            Fw = np.zeros_like(d, dtype=float)
            # within-step maxima from the bridge law remove the monitoring bias of the height
            a0, a1 = vv[:, :-1], vv[:, 1:]
            sig = np.broadcast_to(spec.sigma(np.where(np.isfinite(a0), a0, x)), a0.shape)
            with np.errstate(invalid="ignore"):
                smax = bridge_maximum(a0, a1, sig * sig * dt, 1.0 - rng.random(a0.shape))
            smax = np.where(np.isfinite(smax), smax, -np.inf)
            per = np.minimum(smin, vv[:, 1:])
            H = np.minimum.accumulate(np.concatenate([np.full((size, 1), x), per], axis=1), axis=1)[:, 1:]
            for i in range(size):
                idx = np.flatnonzero(new[i])
                if idx.size == 0:
                    continue
                row = smax[i]
                seg_max = np.maximum.reduceat(row, idx)
                Fw[i, idx] = (seg_max >= H[i, idx] + height).astype(float)
        lhs = np.sum(np.where(new, Z * Fw, 0.0), axis=1)
        # compensator on the same paths
        per = np.minimum(smin, vv[:, 1:])
        H = np.minimum.accumulate(np.concatenate([np.full((size, 1), x), per], axis=1), axis=1)
        H = np.where(np.isfinite(H), H, np.nan)
        H = np.where(np.isnan(H), np.nanmin(H, axis=1, keepdims=True), H)
        sH = spec.scale(H)
        dC = sH[:, :-1] - sH[:, 1:]
        Hmid = np.clip(0.5 * (H[:, :-1] + H[:, 1:]), lo_tab, x)
        rhs = np.sum(Z * nF_tab(Hmid) * dC, axis=1)
        return Welford().add(lhs), Welford().add(rhs)

    parts = map_blocks(block_fn, n, seed, block=block, threads=threads, salt=4)
    L, R = Welford(), Welford()
    for a, b in parts:
        L.merge(a)
        R.merge(b)
    nF_clip = lambda y: float(nF_tab(min(max(y, lo_tab), x)))
    quad = levy_rhs_quadrature(spec, x, z_choice, T, nF_clip) if f_choice != "zero" else 0.0
    if quad is not None:
        z = z_score(L.mean, L.se, quad, 0.0)
    else:
        z = z_score(L.mean, L.se, R.mean, R.se)
    return LevyReport(L.mean, L.se, R.mean, R.se, quad, z, n, z_choice, f_choice)
