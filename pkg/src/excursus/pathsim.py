"""Path simulation, running minimum and excursions above the minimum.

Brownian presets move by exact Gaussian increments and Bessel(3) by the norm
of a three-dimensional Brownian motion; everything else uses Euler-Maruyama.
Killing at rate ``c`` runs on an exponential clock.  Absorbing barriers are
detected with the Brownian-bridge crossing probability
``exp(-2 (a - L)(b - L) / (sigma^2 dt))`` so that paths cannot slip through a
barrier between grid points; the crossing time is placed by linear
interpolation.  Optionally the minimum of each step is sampled from the
bridge law given its endpoints, which removes the discrete-monitoring bias of
the running minimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .spec import LOWER, UPPER, DiffusionSpec


@dataclass(frozen=True, eq=False)
class Path:
    """A trajectory sampled every ``dt`` from ``t0`` until ``lifetime``.

    The last value sits at ``lifetime``, which may fall between grid times
    when the path was absorbed or killed.
    """

    t0: float
    dt: float
    values: np.ndarray
    lifetime: float
    absorbed: bool = False
    killed: bool = False
    exited: bool = False
    step_min: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.size == 0:
            raise ValueError("empty path")
        expected = int(math.ceil((self.lifetime - self.t0) / self.dt - 1e-9)) + 1
        if v.size != expected:
            raise ValueError(f"path has {v.size} values, lifetime implies {expected}")

    @property
    def times(self) -> np.ndarray:
        t = self.t0 + self.dt * np.arange(self.values.size)
        t[-1] = self.lifetime
        return t

    def reversed(self) -> "Path":
        """Time reversal ``t -> lifetime - t`` on a uniform grid (requires an on-grid lifetime)."""
        return Path(self.t0, self.dt, self.values[::-1].copy(), self.lifetime)


@dataclass(eq=False)
class PathBatch:
    """Many paths on a common grid; entries after each path's end are NaN."""

    t0: float
    dt: float
    values: np.ndarray  # (n, m+1)
    lifetime: np.ndarray
    absorbed: np.ndarray
    killed: np.ndarray
    exited: np.ndarray
    last: np.ndarray  # index of the final value
    step_min: Optional[np.ndarray] = None  # (n, m)

    def __len__(self):
        return self.values.shape[0]

    def path(self, i: int) -> Path:
        k = int(self.last[i])
        sm = None if self.step_min is None else self.step_min[i, :k].copy()
        return Path(self.t0, self.dt, self.values[i, : k + 1].copy(), float(self.lifetime[i]),
                    bool(self.absorbed[i]), bool(self.killed[i]), bool(self.exited[i]), sm)

    def paths(self) -> List[Path]:
        return [self.path(i) for i in range(len(self))]

    def final_values(self) -> np.ndarray:
        return self.values[np.arange(len(self)), self.last]


def bridge_minimum(a, b, var, u) -> np.ndarray:
    """Minimum of a Brownian bridge from ``a`` to ``b`` with total variance ``var`` (inverse CDF at ``u``)."""
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 - 2.0 * var * np.log(u)))


def bridge_maximum(a, b, var, u) -> np.ndarray:
    return 0.5 * (a + b + np.sqrt((a - b) ** 2 - 2.0 * var * np.log(u)))


def crossing_probability(a, b, level, var) -> np.ndarray:
    """Probability that a Brownian bridge from ``a`` to ``b`` (both above ``level``) dips below it."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p = np.exp(-2.0 * (a - level) * (b - level) / var)
    return np.where(var > 0, np.where((a > level) & (b > level), p, 1.0), (b <= level).astype(float))


def sample_step_argmin(a, b, m, dt: float, var, rng: np.random.Generator, n_grid: int = 400) -> np.ndarray:
    """Location in ``[0, dt]`` of the minimum ``m`` of a Brownian bridge from ``a`` to ``b``.

    Given the minimum, the argmin has density proportional to
    ``f(theta; a - m) f(dt - theta; b - m)`` with ``f`` the first-passage
    density; sampled by inverse CDF on a logit grid.
    """
    a, b, m, var = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, float)) for v in (a, b, m, var)))
    sig2 = var / dt
    A = np.maximum(a - m, 0.0) ** 2 / (2 * sig2 * dt)
    B = np.maximum(b - m, 0.0) ** 2 / (2 * sig2 * dt)
    s = np.linspace(-40.0, 40.0, n_grid)
    v = 1.0 / (1.0 + np.exp(-s))
    w = 1.0 / (1.0 + np.exp(s))
    logd = (-0.5 * np.log(v) - 0.5 * np.log(w))[None, :] - A[:, None] / v[None, :] - B[:, None] / w[None, :]
    logd -= logd.max(axis=1, keepdims=True)
    d = np.exp(logd)
    cdf = np.concatenate([np.zeros((d.shape[0], 1)), np.cumsum(0.5 * (d[:, 1:] + d[:, :-1]), axis=1)], axis=1)
    cdf /= cdf[:, -1:]
    u = rng.random(d.shape[0])
    idx = np.clip(np.sum(cdf < u[:, None], axis=1), 1, n_grid - 1)
    c0 = cdf[np.arange(idx.size), idx - 1]
    c1 = cdf[np.arange(idx.size), idx]
    frac = np.where(c1 > c0, (u - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.5)
    ss = s[idx - 1] + frac * (s[idx] - s[idx - 1])
    return dt / (1.0 + np.exp(-ss))


class _Stepper:
    """One-step transition for a spec, vectorised over paths."""

    def __init__(self, spec: DiffusionSpec, dt: float):
        self.spec, self.dt = spec, dt
        self.kind = spec.family if spec.family in ("brownian", "brownian-absorbed") else (
            "bessel3" if spec.name == "bessel3" else "euler")
        self.const_kill = None
        if not spec.kill_free:
            probe = np.linspace(*spec.window, 17)
            c = np.broadcast_to(spec.kill_rate(probe), probe.shape)
            if np.all(c == c[0]):
                self.const_kill = float(c[0])
        elif spec.kill_free:
            self.const_kill = 0.0

    def step(self, a: np.ndarray, rng: np.random.Generator):
        dt = self.dt
        if self.kind in ("brownian", "brownian-absorbed"):
            b = a + self.spec.mu * dt + math.sqrt(dt) * rng.standard_normal(a.size)
            return b, np.full(a.size, dt)
        if self.kind == "bessel3":
            z = rng.standard_normal((a.size, 3)) * math.sqrt(dt)
            z[:, 0] += a
            return np.sqrt(np.sum(z * z, axis=1)), np.full(a.size, dt)
        sig = np.broadcast_to(self.spec.sigma(a), a.shape)
        b = a + self.spec.drift(a) * dt + sig * math.sqrt(dt) * rng.standard_normal(a.size)
        return b, sig * sig * dt


def simulate_paths(
    spec: DiffusionSpec,
    x0: float,
    dt: float,
    horizon: float,
    n: int,
    rng: np.random.Generator,
    *,
    step_minima: bool = False,
    stop_below: Optional[float] = None,
    window_check: Optional[bool] = None,
) -> PathBatch:
    """Simulate ``n`` paths from ``x0`` on ``[0, horizon]``.

    Parameters
    ----------
    step_minima : bool
        Also sample the minimum of every step from the bridge law.
    stop_below : float, optional
        Extra absorbing level (the path is stopped on reaching it).
    window_check : bool, optional
        Truncate and flag paths leaving the working window.  Defaults to True
        except for Brownian presets, whose increments need no tabulation.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    m = int(math.ceil(horizon / dt - 1e-9))
    st = _Stepper(spec, dt)
    if window_check is None:
        window_check = st.kind == "euler"
    lo_abs = -math.inf
    A = spec.interval.lower
    if np.isfinite(A) and (LOWER in spec.absorbing or (not spec.sde_only and spec.boundary(LOWER).kind
                                                         in ("exit", "regular-absorbing"))):
        lo_abs = A
    if stop_below is not None:
        lo_abs = max(lo_abs, float(stop_below))
    hi_abs = spec.interval.upper if np.isfinite(spec.interval.upper) else math.inf
    vals = np.full((n, m + 1), np.nan)
    vals[:, 0] = x0
    smin = np.full((n, m), np.nan) if step_minima else None
    lifetime = np.full(n, float(horizon))
    absorbed = np.zeros(n, bool)
    killed = np.zeros(n, bool)
    exited = np.zeros(n, bool)
    last = np.full(n, m, dtype=int)
    if x0 <= lo_abs:
        vals[:, 0] = x0
        return PathBatch(0.0, dt, vals[:, :1], np.zeros(n), np.ones(n, bool), killed, exited,
                         np.zeros(n, int), None if smin is None else smin[:, :0])
    clock = rng.exponential(size=n)
    hazard = np.zeros(n)
    active = np.arange(n)
    a = np.full(n, float(x0))
    for k in range(m):
        if active.size == 0:
            break
        t_k = k * dt
        h = min(dt, horizon - t_k)
        b, var = st.step(a, rng)
        if h < dt:  # shortened last step
            b = a + (b - a) * math.sqrt(h / dt)
            var = var * h / dt
        end_t = np.full(active.size, t_k + h)
        done = np.zeros(active.size, bool)
        # killing clock
        if st.const_kill:
            hz = hazard + st.const_kill * h
        elif st.const_kill is None:
            hz = hazard + 0.5 * h * (spec.kill_rate(a) + spec.kill_rate(np.maximum(b, lo_abs)))
        else:
            hz = hazard
        kill = hz >= clock
        # barrier crossing (bridge-corrected below, endpoint test above)
        cross_lo = np.zeros(active.size, bool)
        cross_hi = np.zeros(active.size, bool)
        theta = np.full(active.size, h)
        if np.isfinite(lo_abs):
            p = crossing_probability(a, b, lo_abs, var)
            cross_lo = (b <= lo_abs) | (rng.random(active.size) < p)
            with np.errstate(divide="ignore", invalid="ignore"):
                lin = np.where(b <= lo_abs, (a - lo_abs) / (a - b), (a - lo_abs) / ((a - lo_abs) + (b - lo_abs)))
            theta = np.where(cross_lo, np.clip(np.nan_to_num(lin, nan=0.5), 0.0, 1.0) * h, h)
        if np.isfinite(hi_abs):
            up = b >= hi_abs
            lin_u = np.clip((hi_abs - a) / np.where(b != a, b - a, 1.0), 0.0, 1.0) * h
            cross_hi = up & (~cross_lo | (lin_u < theta))
            cross_lo &= ~cross_hi
            theta = np.where(cross_hi, lin_u, theta)
        cross = cross_lo | cross_hi
        if np.any(kill):
            if st.const_kill:
                tk = (clock - hazard) / st.const_kill
            else:
                inc = np.where(hz > hazard, hz - hazard, 1.0)
                tk = (clock - hazard) / inc * h
            tk = np.clip(tk, 0.0, h)
            kill = kill & (~cross | (tk < theta))
            cross = cross & ~kill
            cross_lo &= ~kill
        if step_minima:
            mn = np.where(var > 0, bridge_minimum(a, b, np.maximum(var, 1e-300), rng.random(active.size)),
                          np.minimum(a, b))
        idx = active
        if np.any(cross):
            c = np.flatnonzero(cross)
            level = np.where(cross_lo[c], lo_abs, hi_abs)
            b[c] = level
            end_t[c] = t_k + theta[c]
            absorbed[idx[c]] = True
            done[c] = True
            if step_minima:
                mn[c] = np.minimum(np.minimum(a[c], level), np.where(cross_lo[c], level, mn[c]))
        if np.any(kill):
            c = np.flatnonzero(kill)
            b[c] = a[c] + (b[c] - a[c]) * (tk[c] / h)
            end_t[c] = t_k + tk[c]
            killed[idx[c]] = True
            done[c] = True
            if step_minima:
                mn[c] = np.minimum(a[c], b[c])
        if window_check:
            out = ~done & ((b < spec.window[0]) | (b > spec.window[1]))
            if np.any(out):
                c = np.flatnonzero(out)
                exited[idx[c]] = True
                done[c] = True
        vals[idx, k + 1] = b
        if step_minima:
            smin[idx, k] = mn
        if np.any(done):
            c = np.flatnonzero(done)
            lifetime[idx[c]] = end_t[c]
            last[idx[c]] = k + 1
        keep = ~done
        active = active[keep]
        a = b[keep]
        hazard = hz[keep]
        clock = clock[keep]
    return PathBatch(0.0, dt, vals, lifetime, absorbed, killed, exited, last, smin)


def sample_path(spec: DiffusionSpec, x0: float, dt: float, horizon: float, rng: np.random.Generator,
                **kw) -> Path:
    """A single path; see :func:`simulate_paths`."""
    return simulate_paths(spec, x0, dt, horizon, 1, rng, **kw).path(0)


def sample_paths(spec: DiffusionSpec, x0: float, dt: float, horizon: float, n: int,
                 rng: np.random.Generator, **kw) -> List[Path]:
    return simulate_paths(spec, x0, dt, horizon, n, rng, **kw).paths()


# ---------------------------------------------------------------------------
# running minimum and excursions


@dataclass(frozen=True, eq=False)
class MinFunctional:
    """Running minimum ``H``, argmin time ``rho`` at the horizon and ``C = s(H_0) - s(H)``."""

    H: np.ndarray
    rho: float
    C: Optional[np.ndarray]
    rho_index: int


def running_minimum(path: Path, spec: Optional[DiffusionSpec] = None, use_step_min: bool = False) -> MinFunctional:
    """Running minimum on the grid; ties in the argmin go to the earliest index.

    With ``use_step_min`` the within-step minima refine ``H`` (value at grid
    point ``k`` covers the path up to time ``k dt``); ``rho`` is then the
    midpoint of the step holding the overall minimum.
    """
    v = path.values
    if use_step_min and path.step_min is not None and path.step_min.size:
        per = np.concatenate([[v[0]], np.minimum(path.step_min, v[1:])])
        H = np.minimum.accumulate(per)
        k = int(np.argmin(per))
        rho = path.t0 if k == 0 else path.t0 + (k - 0.5) * path.dt
    else:
        H = np.minimum.accumulate(v)
        k = int(np.argmin(v))
        rho = float(path.times[k])
    C = None
    if spec is not None and not spec.sde_only:
        sH = spec.scale(H)
        C = sH[0] - sH
    return MinFunctional(H, float(rho), C, k)


@dataclass(frozen=True, eq=False)
class ExcursionRecord:
    """Excursion above the minimum starting at time ``u`` from level ``y``."""

    u: float
    level: float
    duration: float
    fragment: Path
    complete: bool = True


def excursion_bounds(values: np.ndarray) -> List[tuple]:
    """Index pairs ``(i, j)`` delimiting maximal constancy intervals of the running minimum.

    ``i`` is a time at which the path sits at its running minimum and ``j``
    is the next index where a new strict minimum is set (or ``len - 1`` for
    the open final stretch); only intervals with an interior sample count.
    """
    v = np.asarray(values, dtype=float)
    prev = np.minimum.accumulate(v)
    new = np.concatenate([[True], v[1:] < prev[:-1]])
    starts = np.flatnonzero(new)
    out = [(int(s), int(e), True) for s, e in zip(starts[:-1], starts[1:]) if e - s >= 2]
    if v.size - 1 - starts[-1] >= 1:
        out.append((int(starts[-1]), v.size - 1, False))
    return out


def extract_excursions(path: Path, min_duration: float) -> List[ExcursionRecord]:
    """Excursions above the running minimum lasting at least ``min_duration``.

    The final stretch, cut off by the end of the path, is reported with
    ``complete=False``.
    """
    if min_duration < path.dt - 1e-15:
        raise ValueError("min_duration must be at least dt")
    v = path.values
    t = path.times
    recs = []
    for i, j, closed in excursion_bounds(v):
        dur = t[j] - t[i]
        if dur < min_duration - 1e-12:
            continue
        if np.any(v[i + 1 : j] <= v[i]):
            continue
        frag = Path(0.0, path.dt, v[i : j + 1].copy(), dur)
        recs.append(ExcursionRecord(float(t[i]), float(v[i]), float(dur), frag, complete=closed))
    return recs


def new_minimum_steps(values: np.ndarray, step_min: np.ndarray, x0=None) -> np.ndarray:
    """Boolean (n, m) mask of steps whose bridge minimum undercuts the running minimum so far."""
    v0 = values[:, :1] if x0 is None else np.full((values.shape[0], 1), x0)
    per = np.minimum(step_min, values[:, 1:])
    H = np.minimum.accumulate(np.concatenate([v0, per], axis=1), axis=1)
    return per < H[:, :-1]


def excursion_durations_refined(new: np.ndarray, dt: float) -> np.ndarray:
    """Steps until the next new minimum for every new-minimum step (large sentinel if none)."""
    n, m = new.shape
    big = m + 10 ** 6
    idx = np.where(new, np.arange(m), big)
    nxt = np.minimum.accumulate(idx[:, ::-1], axis=1)[:, ::-1]
    nxt = np.concatenate([nxt[:, 1:], np.full((n, 1), big)], axis=1)
    return nxt - np.arange(m)


# ---------------------------------------------------------------------------
# Monte Carlo functionals


def hitting_laplace_mc(spec: DiffusionSpec, x: float, y: float, alpha: float, dt: float, n: int,
                       rng: np.random.Generator, horizon: Optional[float] = None):
    """Estimate ``E^x exp(-alpha T_y)`` (downward passage); returns ``(mean, se)``.

    Paths are followed until ``T_y`` or ``horizon`` (default ``14/alpha``, where
    the discount ``e^-14 < 1e-6`` makes later hits negligible); only the current
    state is kept.
    """
    if not x > y:
        raise ValueError("only downward passages (x > y) are supported")
    horizon = 14.0 / alpha if horizon is None else horizon
    m = int(math.ceil(horizon / dt))
    st = _Stepper(spec, dt)
    a = np.full(n, float(x))
    active = np.arange(n)
    score = np.zeros(n)
    for k in range(m):
        if active.size == 0:
            break
        b, var = st.step(a, rng)
        p = crossing_probability(a, b, y, var)
        cross = (b <= y) | (rng.random(a.size) < p)
        if np.any(cross):
            c = np.flatnonzero(cross)
            with np.errstate(divide="ignore", invalid="ignore"):
                lin = np.where(b[c] <= y, (a[c] - y) / (a[c] - b[c]), (a[c] - y) / ((a[c] - y) + (b[c] - y)))
            th = (k + np.clip(np.nan_to_num(lin, nan=0.5), 0, 1)) * dt
            score[active[c]] = np.exp(-alpha * th)
        keep = ~cross
        active = active[keep]
        a = b[keep]
    return float(score.mean()), float(score.std(ddof=1) / math.sqrt(n))
