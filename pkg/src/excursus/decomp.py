"""Path decompositions at the global minimum and at the minimum before a fixed time.

A transient path from ``x`` splits at its global minimum ``gamma`` (reached
at time ``rho``) into a piece conditioned to reach ``gamma`` and a piece
started at ``gamma`` and conditioned never to return.  Both pieces are
h-transforms of the original diffusion: the first by the ruin function
``r``, the second by ``r_y = 1 - r / r(y)``.

Up to a fixed time ``t`` the path splits instead at the minimum ``H_t``
(reached at ``rho_t``); the triple ``(H_t, rho_t, X_t)`` has density
``f(u; b, y) f(t - u; x, y)`` with respect to ``ds(y) du m(dx)`` and, given
the triple, the two fragments are independent bridges.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats as sps

from . import densities as dens
from .eigen import EigenError, NotTransientError, RuinFunction, ruin_function, solve_eigenfunctions
from .pathsim import Path, crossing_probability, sample_step_argmin, simulate_paths
from .rng import map_blocks
from .spec import UPPER, DiffusionSpec
from .stats import GofReport, Welford, chi2_test, ks2_test, ks_test, z_score

HAT = "hat"
REVERSED = "reversed"


class NormalizationError(RuntimeError):
    """A bridge transition kernel failed its numerical normalisation check."""


@dataclass(frozen=True, eq=False)
class WilliamsSample:
    """Global-minimum decomposition of one path.

    ``pre`` runs from ``x`` down to ``gamma``; ``post`` starts at ``gamma``
    and stays above it; ``full`` is their concatenation with the minimum at
    ``rho = pre.lifetime``.
    """

    gamma: float
    rho: float
    pre: Path
    post: Path
    full: Path

    @property
    def zeta(self) -> float:
        return self.full.lifetime if (self.post.killed or self.post.absorbed) else math.inf


@dataclass(frozen=True)
class BridgeLaw:
    """Law of a path above the floor ``y`` over ``[0, length]``.

    ``hat``: from ``y`` up to ``endpoint`` at time ``length``.
    ``reversed``: from ``endpoint`` down to ``y`` at time ``length``.
    """

    kind: str
    y: float
    length: float
    endpoint: float

    def __post_init__(self):
        if self.kind not in (HAT, REVERSED):
            raise ValueError(f"bridge kind must be {HAT!r} or {REVERSED!r}")
        if not self.endpoint > self.y:
            raise ValueError("the endpoint must lie strictly above the floor")
        if not self.length > 0:
            raise ValueError("bridge length must be positive")


# ---------------------------------------------------------------------------
# global minimum


def _brownian_nu(spec: DiffusionSpec) -> float:
    return math.sqrt(spec.mu ** 2 + 2.0 * spec.beta)


def _require_transient(spec: DiffusionSpec, rf: Optional[RuinFunction]) -> RuinFunction:
    if rf is None:
        rf = ruin_function(spec)
    if not rf.transient:
        raise NotTransientError(f"{spec.name}: the global minimum is not attained (no transience)")
    return rf


def _minimum_level(spec: DiffusionSpec, x: float, u: np.ndarray, rf: RuinFunction) -> np.ndarray:
    """Solve ``r(x) / r(gamma) = u`` for ``gamma``."""
    if spec.family == "brownian":
        if spec.kill_free and spec.mu <= 0:
            raise NotTransientError(f"{spec.name} is not upward-transient")
        # r(z) = exp(-(mu + nu) z)
        k = spec.mu + _brownian_nu(spec)
        return x + np.log(u) / k
    if spec.kill_free and spec.scale_inverse is not None:
        s_x = float(spec.scale(np.array(x)))
        tail = rf._tail(np.array(x)) * rf.tail_scale
        s_top = s_x + tail
        return spec.scale_inv(s_top - tail / u)
    target = float(rf.log_r_at(np.array(x))) - np.log(u)
    lr = rf.log_r  # decreasing in the state
    if np.any(target > lr[0]):
        raise EigenError("sampled minimum falls below the working window; widen the window")
    return np.interp(target, lr[::-1], rf.x[::-1])


def sample_minimum(spec: DiffusionSpec, x: float, rng: np.random.Generator, *, n: Optional[int] = None,
                   rf: Optional[RuinFunction] = None, with_rho: bool = True, dt: float = 1e-3,
                   max_steps: int = 2_000_000):
    """Sample the global minimum ``gamma`` and its time ``rho`` from ``x``.

    ``gamma`` comes from ``P^x(gamma <= y) = r(x) / r(y)`` by inversion;
    given ``gamma = y``, ``rho`` has the law of ``T_y`` conditioned on
    ``T_y < inf``: inverse Gaussian for Brownian presets, otherwise the
    lifetime of a simulated conditioned-down path with step ``dt`` (an
    :class:`EigenError` is raised if one needs more than ``max_steps``).

    Returns floats, or arrays of length ``n`` when ``n`` is given; ``rho`` is
    NaN when ``with_rho`` is False.
    """
    rf = _require_transient(spec, rf)
    size = 1 if n is None else int(n)
    u = rng.random(size)
    gamma = _minimum_level(spec, x, 1.0 - u, rf)
    a = x - gamma
    if not with_rho:
        rho = np.full(size, np.nan)
    elif spec.family == "brownian":
        nu = _brownian_nu(spec)
        rho = rng.wald(a / nu, a * a)
    else:
        if np.any(gamma <= spec.window[0]):
            raise EigenError("sampled minimum falls below the working window; widen the window")
        # T_y given T_y < inf is the lifetime of the path conditioned to reach y
        rho = conditioned_down_lifetimes(spec, x, gamma, rng, dt=dt, rf=rf, max_steps=max_steps)
    if n is None:
        return float(gamma[0]), float(rho[0])
    return gamma, rho


def minimum_cdf(spec: DiffusionSpec, x: float, y, rf: Optional[RuinFunction] = None) -> np.ndarray:
    """``P^x(gamma <= y) = r(x) / r(y)`` for ``y < x`` (1 for ``y >= x``)."""
    rf = _require_transient(spec, rf)
    y = np.asarray(y, dtype=float)
    if spec.family == "brownian":
        k = spec.mu + _brownian_nu(spec)
        return np.where(y < x, np.exp(-k * (x - np.minimum(y, x))), 1.0)
    return rf.hit_probability(x, np.minimum(y, x))


# ---------------------------------------------------------------------------
# conditioned samplers


class _DownDrift:
    """Drift ``b + sigma^2 r'/r`` of the path conditioned to reach the floor."""

    def __init__(self, spec: DiffusionSpec, rf: Optional[RuinFunction]):
        self.spec = spec
        self.exact = spec.family == "brownian"
        if self.exact:
            self.const = -_brownian_nu(spec)
            self.rf = None
        else:
            self.rf = _require_transient(spec, rf)

    def __call__(self, z):
        if self.exact:
            return np.full_like(z, self.const)
        s = self.spec
        sig = np.broadcast_to(s.sigma(z), z.shape)
        return s.drift(z) + sig * sig * self.rf.w_at(z)


def _run_down(spec: DiffusionSpec, x: np.ndarray, y: np.ndarray, rng: np.random.Generator, dt: float,
              drift: _DownDrift, keep: bool, max_steps: int):
    """Lockstep Euler (exact for Brownian presets) until each path hits its floor.

    Returns lifetimes (crossing placed at the middle of the crossing step),
    exit flags, and the stored trajectories when ``keep``.
    """
    z = np.array(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = z.size
    alive = np.ones(n, dtype=bool)
    life = np.full(n, np.nan)
    exited = np.zeros(n, dtype=bool)
    lo, hi = spec.window
    traj = [z.copy()] if keep else None
    sq = math.sqrt(dt)
    for k in range(1, max_steps + 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        a = z[idx]
        sig = np.broadcast_to(spec.sigma(a), a.shape) if not drift.exact else np.ones_like(a)
        b = a + drift(a) * dt + sig * sq * rng.standard_normal(idx.size)
        var = sig * sig * dt
        hit = rng.random(idx.size) < crossing_probability(a, b, y[idx], var)
        out = ((b > hi) | (b < lo)) & ~hit if not drift.exact else np.zeros(idx.size, dtype=bool)
        b = np.where(hit, y[idx], b)
        z[idx] = b
        done = hit | out
        life[idx[done]] = (k - 0.5) * dt
        exited[idx[out]] = True
        alive[idx[done]] = False
        if keep:
            traj.append(z.copy())
    if np.any(alive):
        raise EigenError(f"conditioned path did not reach its floor within {max_steps} steps")
    return life, exited, traj


def sample_conditioned_down(spec: DiffusionSpec, x: float, y: float, rng: np.random.Generator, *,
                            dt: float = 1e-3, rf: Optional[RuinFunction] = None,
                            max_steps: int = 2_000_000) -> Path:
    """Path from ``x`` conditioned to reach ``y < x``, stopped there.

    The drift is ``b + sigma^2 (log r)'`` and killing disappears; for
    Brownian presets this is Brownian motion with drift
    ``-sqrt(mu^2 + 2 beta)``, simulated exactly.  Crossings between grid
    points use the bridge crossing probability; the final value is ``y``.
    """
    if not y < x:
        raise ValueError("the floor must lie below the start")
    drift = _DownDrift(spec, rf)
    life, exited, traj = _run_down(spec, np.array([x]), np.array([y]), rng, dt, drift, True, max_steps)
    vals = np.array([v[0] for v in traj])
    return Path(0.0, dt, vals, float(life[0]), absorbed=not exited[0], exited=bool(exited[0]))


def conditioned_down_lifetimes(spec: DiffusionSpec, x: float, y, rng: np.random.Generator, *,
                               dt: float = 1e-3, rf: Optional[RuinFunction] = None,
                               max_steps: int = 2_000_000) -> np.ndarray:
    """Lifetimes of many conditioned-down paths (one floor per path) without storing them."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    drift = _DownDrift(spec, rf)
    life, _, _ = _run_down(spec, np.full(y.size, float(x)), y, rng, dt, drift, False, max_steps)
    return life


class _UpDrift:
    """Pieces of the ``r_y``-transform: ``h'/h`` and the killing rate ``c / h``."""

    def __init__(self, spec: DiffusionSpec, y: float, rf: Optional[RuinFunction]):
        self.spec, self.y = spec, y
        self.brownian = spec.family == "brownian"
        if self.brownian:
            self.k = spec.mu + _brownian_nu(spec)
            if spec.kill_free and spec.mu <= 0:
                raise NotTransientError(f"{spec.name} is not upward-transient")
        else:
            self.rf = _require_transient(spec, rf)
            self.lr_y = float(self.rf.log_r_at(np.array(y)))

    def log_h_slope(self, z):
        d = z - self.y
        if self.brownian:
            return self.k / np.expm1(self.k * d)
        lr = self.rf.log_r_at(z)
        return -self.rf.w_at(z) / np.expm1(self.lr_y - lr)

    def h(self, z):
        if self.brownian:
            return -np.expm1(-self.k * (z - self.y))
        return -np.expm1(self.rf.log_r_at(z) - self.lr_y)


def sample_conditioned_up(spec: DiffusionSpec, y: float, horizon: float, rng: np.random.Generator, *,
                          dt: float = 1e-3, rf: Optional[RuinFunction] = None,
                          delta: Optional[float] = None) -> Path:
    """Path started at ``y`` and conditioned never to return to it.

    The drift ``b + sigma^2 (log r_y)'`` behaves like ``sigma^2 / (z - y)``
    near ``y``; each step is an exact Bessel(3) step of the distance to the
    floor followed by the bounded remainder drift, applied multiplicatively so
    the path stays above ``y``.  The path enters at ``y + delta`` (default one
    grid step).  Killing, if any, runs at rate ``c / r_y``.
    """
    ud = _UpDrift(spec, y, rf)
    delta = spec.h if delta is None else float(delta)
    m = int(math.ceil(horizon / dt - 1e-9))
    hi = spec.window[1]
    vals = [y]
    R = delta
    killed = exited = False
    sq = math.sqrt(dt)
    for k in range(1, m + 1):
        z0 = y + R
        sig = float(np.broadcast_to(spec.sigma(np.array(z0)), ()))
        g = rng.standard_normal(3) * sig * sq
        Rb = math.sqrt((R + g[0]) ** 2 + g[1] ** 2 + g[2] ** 2)
        zb = y + Rb
        if not ud.brownian and zb >= hi:
            vals.append(zb)
            exited = True
            break
        sb = float(np.broadcast_to(spec.sigma(np.array(zb)), ()))
        rem = float(spec.drift(np.array(zb))) + sb * sb * float(ud.log_h_slope(np.array(zb))) - sig * sig / Rb
        R = Rb * math.exp(rem * dt / Rb)
        vals.append(y + R)
        if not spec.kill_free:
            c = float(np.broadcast_to(spec.kill_rate(np.array(y + R)), ())) / float(ud.h(np.array(y + R)))
            if rng.random() < -math.expm1(-c * dt):
                killed = True
                break
    life = (len(vals) - 1) * dt
    return Path(0.0, dt, np.array(vals), life, killed=killed, exited=exited)


def williams_sample(spec: DiffusionSpec, x: float, rng: np.random.Generator, *, dt: float = 1e-3,
                    horizon: float = 5.0, rf: Optional[RuinFunction] = None) -> WilliamsSample:
    """Sample ``gamma``, then the conditioned-down and conditioned-up pieces, and splice them."""
    rf = _require_transient(spec, rf)
    gamma, _ = sample_minimum(spec, x, rng, rf=rf)
    pre = sample_conditioned_down(spec, x, gamma, rng, dt=dt, rf=rf)
    post = sample_conditioned_up(spec, gamma, horizon, rng, dt=dt, rf=rf)
    rho = pre.lifetime
    # the crossing sits inside the last step of pre; splice on pre's grid
    vals = np.concatenate([pre.values, post.values[1:]])
    full_life = pre.t0 + (pre.values.size - 1) * dt + post.lifetime
    full = Path(0.0, dt, vals, full_life, killed=post.killed, exited=pre.exited or post.exited)
    return WilliamsSample(gamma, rho, pre, post, full)


def williams_batch(spec: DiffusionSpec, x: float, n: int, seed: int, *, dt: float = 1e-3,
                   threads: Optional[int] = None, block: int = 2000) -> dict:
    """``gamma`` and ``rho`` (lifetime of the conditioned-down piece) for ``n`` decompositions.

    Paths are not stored.  ``zeta`` is infinite without killing; with killing
    it is ``rho`` plus an exponential-clock lifetime of the conditioned-up
    piece, which is sampled only for Brownian presets (constant ``beta``).
    """
    rf = _require_transient(spec, None)

    def block_fn(b, size, rng):
        gamma, _ = sample_minimum(spec, x, rng, n=size, rf=rf)
        rho = conditioned_down_lifetimes(spec, x, gamma, rng, dt=dt, rf=rf)
        return gamma, rho

    parts = map_blocks(block_fn, n, seed, block=block, threads=threads, salt=7)
    gamma = np.concatenate([p[0] for p in parts])
    rho = np.concatenate([p[1] for p in parts])
    zeta = np.full(n, np.inf) if spec.kill_free else np.full(n, np.nan)
    return {"gamma": gamma, "rho": rho, "zeta": zeta}


def minimum_laplace_quadrature(spec: DiffusionSpec, x: float, alpha: float, f=None,
                               rf: Optional[RuinFunction] = None) -> float:
    """``P^x[f(gamma) e^{-alpha rho}] = int_{y<x} f(y) P^x(e^{-alpha T_y}) (-dr(y)/r(y))``.

    The hitting transform is ``g2(x)/g2(y)`` from the eigenfunction solver
    and ``-dr/r = -w dy``; ``f`` defaults to 1.
    """
    rf = _require_transient(spec, rf)
    f = (lambda y: np.ones_like(y)) if f is None else f
    pair = solve_eigenfunctions(spec, alpha)
    lo = spec.window[0]
    ys = np.linspace(lo, x, 8001)
    lg = pair.log_g2(np.array(x)) - pair.log_g2(ys)
    vals = f(ys) * np.exp(lg) * (-rf.w_at(ys))
    return float(integrate.simpson(vals, x=ys))


# ---------------------------------------------------------------------------
# local decomposition at the minimum before t


def minimum_joint_density(spec: DiffusionSpec, b: float, t: float, u, y, x) -> np.ndarray:
    """Density of ``(H_t, rho_t, X_t)`` at ``(y, u, x)`` w.r.t. ``ds(y) du m(dx)``: ``f(u; b, y) f(t-u; x, y)``."""
    u, y, x = np.broadcast_arrays(np.asarray(u, float), np.asarray(y, float), np.asarray(x, float))
    if np.any((u <= 0) | (u >= t)):
        raise ValueError("u must lie in ]0, t[")
    out = np.zeros(u.shape)
    ok = (y < b) & (y < x)
    for i in zip(*np.nonzero(ok)) if u.ndim else ([()] if ok else []):
        out[i] = (dens.first_passage_density(spec, np.array(u[i]), b, float(y[i]))
                  * dens.first_passage_density(spec, np.array(t - u[i]), float(x[i]), float(y[i])))
    return out


def _brownian_bin_mass(t: float, b: float, y_edges, u_edges, x_edges) -> np.ndarray:
    """Probability of each ``(y, u, x)`` box under the standard Brownian joint law."""
    def f(u, d):  # first-passage density over distance d >= 0
        return d / np.sqrt(2 * np.pi * u ** 3) * np.exp(-d * d / (2 * u))

    def x_mass(tau, y, x1, x2):
        # int_{max(x1,y)}^{x2} f(tau; x, y) m'(x) dx with m' = 2
        lo = np.maximum(x1, y)
        if x2 <= lo:
            return 0.0
        d1, d2 = lo - y, x2 - y
        e2 = 0.0 if np.isinf(d2) else np.exp(-d2 * d2 / (2 * tau))
        return 2.0 * (np.exp(-d1 * d1 / (2 * tau)) - e2) / np.sqrt(2 * np.pi * tau)

    out = np.zeros((len(y_edges) - 1, len(u_edges) - 1, len(x_edges) - 1))
    for i in range(len(y_edges) - 1):
        for j in range(len(u_edges) - 1):
            # u = t sin^2(theta) tames both ends of the time interval
            th1, th2 = (math.asin(math.sqrt(v / t)) for v in (u_edges[j], u_edges[j + 1]))
            for k in range(len(x_edges) - 1):
                def integrand(yv, th):
                    u = t * math.sin(th) ** 2
                    if u <= 0 or u >= t:
                        return 0.0
                    jac = 2 * t * math.sin(th) * math.cos(th)
                    return f(u, b - yv) * x_mass(t - u, yv, x_edges[k], x_edges[k + 1]) * jac

                val, _ = integrate.dblquad(integrand, th1, th2, y_edges[i], y_edges[i + 1],
                                           epsabs=1e-11, epsrel=1e-8)
                out[i, j, k] = val
    return out


# default coarse partition: quartiles of -|N(0,1)|, arcsine and N(0,1)
LOCAL_Y_EDGES = (-np.inf, -1.1503493803760079, -0.6744897501960817, -0.31863936396437515, 0.0)
LOCAL_U_EDGES = (0.0, 0.14644660940672624, 0.5, 0.8535533905932737, 1.0)
LOCAL_X_EDGES = (-np.inf, -0.6744897501960817, 0.0, 0.6744897501960817, np.inf)


@dataclass
class LocalDecompositionReport:
    n: int
    t: float
    chi2: GofReport
    minimum_ks: GofReport
    argmin_ks: GofReport
    conditional: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.chi2.passed() and self.minimum_ks.passed() and self.argmin_ks.passed()

    def to_dict(self) -> dict:
        return {"n": self.n, "t": self.t, "chi2": self.chi2.to_dict(), "minimum_ks": self.minimum_ks.to_dict(),
                "argmin_ks": self.argmin_ks.to_dict(), "conditional": self.conditional, "passed": self.passed}


def simulate_minimum_triples(spec: DiffusionSpec, b: float, t: float, n: int, seed: int, *, dt: float = 1e-3,
                             threads: Optional[int] = None, block: int = 2000, probe=None):
    """``(H_t, rho_t, X_t)`` from simulated paths with exact within-step minima and argmin times.

    ``probe`` is an optional box ``((y1, y2), (u1, u2), (x1, x2))``; for paths
    whose triple falls in it the values at ``rho_t / 2`` and ``(t + rho_t) / 2``
    are also returned.
    """
    def block_fn(bi, size, rng):
        batch = simulate_paths(spec, b, dt, t, size, rng, step_minima=True)
        vals, smin = batch.values, batch.step_min
        m = smin.shape[1]
        if vals.shape[1] != m + 1 or np.any(np.isnan(vals)):
            raise EigenError("paths ended before t; the local decomposition needs t < zeta")
        i = np.argmin(smin, axis=1)
        r = np.arange(size)
        H = smin[r, i]
        var = np.broadcast_to(spec.sigma(vals[r, i]), (size,)) ** 2 * dt
        theta = sample_step_argmin(vals[r, i], vals[r, i + 1], H, dt, var, rng)
        rho = i * dt + theta
        X = vals[:, -1]
        extra = None
        if probe is not None:
            (y1, y2), (u1, u2), (x1, x2) = probe
            sel = (H >= y1) & (H < y2) & (rho >= u1) & (rho < u2) & (X >= x1) & (X < x2)
            idx = np.flatnonzero(sel)
            k_pre = np.rint(rho[idx] / (2 * dt)).astype(int)
            k_post = np.rint((t + rho[idx]) / (2 * dt)).astype(int)
            extra = (vals[idx, k_pre], vals[idx, k_post])
        return H, rho, X, extra

    parts = map_blocks(block_fn, n, seed, block=block, threads=threads, salt=9)
    H = np.concatenate([p[0] for p in parts])
    rho = np.concatenate([p[1] for p in parts])
    X = np.concatenate([p[2] for p in parts])
    if probe is None:
        return H, rho, X
    pre = np.concatenate([p[3][0] for p in parts])
    post = np.concatenate([p[3][1] for p in parts])
    return H, rho, X, pre, post


def verify_local_decomposition(spec: DiffusionSpec, b: float = 0.0, t: float = 1.0, n: int = 100_000,
                               seed: int = 0, *, dt: float = 1e-3, threads: Optional[int] = None,
                               conditional: bool = True, min_bin: int = 200) -> LocalDecompositionReport:
    """Compare simulated ``(H_t, rho_t, X_t)`` with the product density on a 4x4x4 partition.

    For standard Brownian motion also checks ``-H_t`` half-normal and
    ``rho_t / t`` arcsine.  The conditional check compares, for paths whose
    triple falls in a small box, the path value at ``rho_t / 2`` with the
    reversed bridge and the value at ``(t + rho_t) / 2`` with the hat bridge
    (both at the box centre); it is reported, not gated, and skipped when the
    box holds fewer than ``min_bin`` paths.
    """
    if spec.family != "brownian" or spec.mu != 0 or spec.beta != 0 or b != 0:
        raise ValueError("the binned oracle is tabulated for standard Brownian motion from 0")
    probe = ((-0.8, -0.5), (0.35 * t, 0.65 * t), (-0.3, 0.3)) if conditional else None
    res = simulate_minimum_triples(spec, b, t, n, seed, dt=dt, threads=threads, probe=probe)
    H, rho, X = res[:3]
    ue = np.array(LOCAL_U_EDGES) * t
    ye = np.array(LOCAL_Y_EDGES) * math.sqrt(t)
    xe = np.array(LOCAL_X_EDGES) * math.sqrt(t)
    obs, _ = np.histogramdd(np.column_stack([H, rho, X]), bins=(ye, ue, xe))
    mass = _brownian_bin_mass(t, b, ye, ue, xe)
    chi = chi2_test(obs.ravel(), n * mass.ravel() / mass.sum())
    ks_h = ks_test(-H / math.sqrt(t), lambda v: 2 * sps.norm.cdf(v) - 1)
    ks_r = ks_test(rho / t, lambda v: 2 / np.pi * np.arcsin(np.sqrt(np.clip(v, 0, 1))))
    cond = {}
    if conditional:
        pre_v, post_v = res[3], res[4]
        (y1, y2), (u1, u2), (x1, x2) = probe
        cond["box"] = [list(v) for v in probe]
        cond["count"] = int(pre_v.size)
        if pre_v.size >= min_bin:
            yc, uc, xc = 0.5 * (y1 + y2), 0.5 * (u1 + u2), 0.5 * (x1 + x2)
            rng = np.random.default_rng([seed, 10])
            k = 2000
            rev = sample_bridge_marginal(spec, BridgeLaw(REVERSED, yc, uc, b), 0.5 * uc, k, rng)
            hat = sample_bridge_marginal(spec, BridgeLaw(HAT, yc, t - uc, xc), 0.5 * (t - uc), k, rng)
            cond["pre"] = ks2_test(pre_v, rev).to_dict()
            cond["post"] = ks2_test(post_v, hat).to_dict()
        else:
            cond["skipped"] = True
    return LocalDecompositionReport(n, t, chi, ks_h, ks_r, cond)


# ---------------------------------------------------------------------------
# bridges above a floor


def _bridge_grid(spec: DiffusionSpec, law: BridgeLaw, n_grid: int) -> np.ndarray:
    y, ell = law.y, law.length
    top = max(law.endpoint, y) + abs(spec.mu) * ell + 8.0 * math.sqrt(ell) * float(
        np.max(np.broadcast_to(spec.sigma(np.array(law.endpoint)), ())))
    if spec.family not in ("brownian", "brownian-absorbed"):
        top = min(top, spec.window[1])
    h = (top - y) / n_grid
    return y + h * (np.arange(n_grid) + 0.5)


def _kernel(spec: DiffusionSpec, t: float, z: np.ndarray, w: np.ndarray, y: float) -> np.ndarray:
    return dens.killed_density(spec, t, z[:, None], w[None, :], y)


def _target(spec: DiffusionSpec, law: BridgeLaw, tau: float, w: np.ndarray) -> np.ndarray:
    """Space-time harmonic factor ``h(t, w)`` with ``tau = length - t`` remaining."""
    if law.kind == HAT:
        return dens.killed_density(spec, tau, w, law.endpoint, law.y)
    return dens.passage_density_field(spec, tau, w, law.y)


def _entrance(spec: DiffusionSpec, law: BridgeLaw, t: float, w: np.ndarray) -> np.ndarray:
    """Law of the first grid value from the pinned start (unnormalised, per unit length)."""
    if law.kind == HAT:
        start = dens.passage_density_field(spec, t, w, law.y)
    else:
        start = dens.killed_density(spec, t, law.endpoint, w, law.y)
    return start * spec.speed_density(w)


def _sample_rows(cum: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    c = cum[rows]
    u = rng.random(rows.size) * c[:, -1]
    return np.minimum(np.sum(c < u[:, None], axis=1), cum.shape[1] - 1)


def sample_bridges(spec: DiffusionSpec, law: BridgeLaw, dt: float, n: int, rng: np.random.Generator, *,
                   n_grid: int = 800, tol: float = 1e-2, stop_at: Optional[int] = None) -> np.ndarray:
    """Sample ``n`` bridge paths on the time grid ``k dt`` (values array ``(n, steps + 1)``).

    Each transition ``z -> w`` over ``dt`` has weight
    ``q^y(dt; z, w) m'(w) h(t + dt, w)``, normalised numerically on a spatial
    grid of cell midpoints above the floor, and sampled by inverse CDF; the
    reported value is spread uniformly over the chosen cell.  The start and
    end values are pinned.  The numerical normaliser is compared with ``h(t, z)``, and a
    relative deviation above ``tol`` (on states carrying the probability mass)
    raises :class:`NormalizationError`.
    """
    ell = law.length
    m = int(round(ell / dt))
    if m < 2 or abs(m * dt - ell) > 1e-9 * max(1.0, ell):
        raise ValueError("the bridge length must be a multiple of dt with at least two steps")
    last = m if stop_at is None else min(stop_at, m)
    grid = _bridge_grid(spec, law, n_grid)
    hz = grid[1] - grid[0]
    wts = np.full(grid.size, hz)
    start, end = (law.y, law.endpoint) if law.kind == HAT else (law.endpoint, law.y)
    out = np.empty((n, last + 1))
    out[:, 0] = start
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", dens.InversionWarning)
        # first step from the pinned start
        h1 = _target(spec, law, ell - dt, grid)
        p = _entrance(spec, law, dt, grid) * h1 * wts
        h0 = _target(spec, law, ell, np.array([law.endpoint if law.kind == REVERSED else law.y + 1e-300]))
        if law.kind == REVERSED:
            _check_norm(p.sum(), float(h0[0]), tol, "first step")
        cum = np.cumsum(p)[None, :]
        idx = _sample_rows(cum, np.zeros(n, dtype=int), rng)
        out[:, 0] = start
        if last >= 1:
            out[:, 1] = grid[idx] + hz * (rng.random(n) - 0.5)
        h_prev = h1
        for k in range(1, min(last, m - 1)):
            tau = ell - (k + 1) * dt
            hk = _target(spec, law, tau, grid)
            K = _kernel(spec, dt, grid, grid, law.y) * (spec.speed_density(grid) * hk * wts)[None, :]
            norm = K.sum(axis=1)
            mass = np.isin(np.arange(grid.size), idx)
            _check_norm(norm[mass], h_prev[mass], tol, f"step {k}")
            cum = np.cumsum(K, axis=1)
            idx = _sample_rows(cum, idx, rng)
            out[:, k + 1] = grid[idx] + hz * (rng.random(n) - 0.5)
            h_prev = hk
        if last == m:
            out[:, m] = end
    return out


def _check_norm(got, want, tol, where):
    got, want = np.atleast_1d(got), np.atleast_1d(want)
    ok = want > 1e-8 * max(float(np.max(want)), 1e-300)
    if not np.any(ok):
        return
    dev = np.max(np.abs(got[ok] / want[ok] - 1.0))
    if dev > tol:
        raise NormalizationError(f"bridge kernel normalisation off by {dev:.2e} at {where}; refine the grid")


def sample_bridge(spec: DiffusionSpec, law: BridgeLaw, dt: float, rng: np.random.Generator, **kw) -> Path:
    """One bridge path; see :func:`sample_bridges`."""
    vals = sample_bridges(spec, law, dt, 1, rng, **kw)[0]
    return Path(0.0, dt, vals, law.length)


def sample_bridge_marginal(spec: DiffusionSpec, law: BridgeLaw, t: float, n: int, rng: np.random.Generator, *,
                           n_steps: int = 50, n_grid: int = 800) -> np.ndarray:
    """Values at (approximately) time ``t`` of ``n`` bridges sampled on ``n_steps`` steps."""
    dt = law.length / n_steps
    k = int(np.clip(round(t / dt), 1, n_steps - 1))
    return sample_bridges(spec, law, dt, n, rng, n_grid=n_grid, stop_at=k)[:, k]


def bridge_marginal_density(spec: DiffusionSpec, law: BridgeLaw, t: float, z) -> np.ndarray:
    """Unnormalised density in ``z`` of the bridge value at time ``t``."""
    z = np.asarray(z, dtype=float)
    if law.kind == HAT:
        a = dens.passage_density_field(spec, t, z, law.y)
        b = dens.killed_density(spec, law.length - t, z, law.endpoint, law.y)
    else:
        a = dens.killed_density(spec, t, law.endpoint, z, law.y)
        b = dens.passage_density_field(spec, law.length - t, z, law.y)
    return a * b * spec.speed_density(z)


# ---------------------------------------------------------------------------
# checks on the global-minimum decomposition


def verify_minimum_law(spec: DiffusionSpec, x: float, n: int, seed: int) -> GofReport:
    """KS of sampled ``gamma`` against ``r(x) / r(y)``."""
    rng = np.random.default_rng([seed, 11])
    rf = _require_transient(spec, None)
    g, _ = sample_minimum(spec, x, rng, n=n, rf=rf)
    return ks_test(g, lambda v: minimum_cdf(spec, x, v, rf))


def verify_minimum_laplace(spec: DiffusionSpec, x: float, n: int, seed: int, *, alpha: float = 1.0,
                           dt: float = 1e-3, threads: Optional[int] = None) -> dict:
    """Empirical ``P^x e^{-alpha rho}`` (``rho`` = lifetime of the pre-minimum piece) vs quadrature."""
    res = williams_batch(spec, x, n, seed, dt=dt, threads=threads)
    w = Welford().add(np.exp(-alpha * res["rho"]))
    quad = minimum_laplace_quadrature(spec, x, alpha)
    z = z_score(w.mean, w.se, quad, 0.0)
    return {"empirical": w.mean, "se": w.se, "quadrature": quad, "z_score": z, "n": n, "passed": abs(z) <= 3.0}
