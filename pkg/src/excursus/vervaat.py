"""Brownian bridge and excursion on [0, 1] and the cyclic-shift transforms between them.

``vervaat_forward`` rotates a bridge so that its minimum sits at the ends and
lifts it by the minimum, producing an excursion; ``vervaat_inverse`` rotates
an excursion around a time ``u`` and shifts it down, producing a bridge.  On
a uniform grid both are index arithmetic with wrap-around modulo ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, stats as sps

from .pathsim import bridge_minimum, sample_step_argmin
from .stats import GofReport, Welford, ks2_test, ks_test, z_score


@dataclass(frozen=True, eq=False)
class LoopPath:
    """Values at ``k / n``, ``k = 0..n``, pinned to 0 at both ends."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size < 3:
            raise ValueError("a loop path needs at least two steps")
        if v[0] != 0.0 or v[-1] != 0.0:
            raise ValueError("loop paths start and end at 0")

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def at(self, t: float) -> float:
        """Value at the grid time nearest to ``t``."""
        return float(self.values[int(round(t * self.n))])


def sample_bridge01(n: int, rng: np.random.Generator, size: Optional[int] = None):
    """Brownian bridge ``W_t - t W_1`` on ``n`` steps (array ``(size, n + 1)`` when ``size`` is given)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    k = 1 if size is None else int(size)
    w = np.zeros((k, n + 1))
    w[:, 1:] = np.cumsum(rng.standard_normal((k, n)), axis=1) / math.sqrt(n)
    t = np.arange(n + 1) / n
    b = w - t[None, :] * w[:, -1:]
    b[:, 0] = 0.0
    b[:, -1] = 0.0
    return LoopPath(b[0]) if size is None else b


def sample_excursion01(n: int, rng: np.random.Generator, size: Optional[int] = None):
    """Normalised Brownian excursion as the norm of three independent bridges."""
    k = 1 if size is None else int(size)
    b = np.stack([sample_bridge01(n, rng, k) for _ in range(3)])
    e = np.sqrt(np.sum(b * b, axis=0))
    e[:, 0] = 0.0
    e[:, -1] = 0.0
    return LoopPath(e[0]) if size is None else e


def _rotate(values: np.ndarray, i) -> np.ndarray:
    """``out[..., k] = values[..., (i + k) mod n]`` for ``k = 0..n``."""
    v = np.asarray(values)
    n = v.shape[-1] - 1
    idx = (np.asarray(i)[..., None] + np.arange(n + 1)) % n
    return np.take_along_axis(v, idx, axis=-1) if v.ndim > 1 else v[idx]


def vervaat_forward(bridge):
    """Rotate a bridge to start at its earliest grid argmin and lift it by the minimum.

    Accepts a :class:`LoopPath` or an array of paths ``(size, n + 1)``.
    """
    v = bridge.values if isinstance(bridge, LoopPath) else np.asarray(bridge, dtype=float)
    core = v[..., :-1]
    i = np.argmin(core, axis=-1)
    h = np.take_along_axis(core, np.asarray(i)[..., None], axis=-1) if core.ndim > 1 else core[i]
    out = _rotate(v, i) - h
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return LoopPath(out) if isinstance(bridge, LoopPath) else out


def vervaat_inverse(excursion, u):
    """Rotate an excursion to start at time ``u`` (nearest interior grid point) and shift it to 0 there."""
    v = excursion.values if isinstance(excursion, LoopPath) else np.asarray(excursion, dtype=float)
    n = v.shape[-1] - 1
    j = np.clip(np.rint(np.broadcast_to(np.asarray(u, dtype=float), v.shape[:-1]) * n).astype(int), 1, n - 1)
    base = np.take_along_axis(v, j[..., None], axis=-1) if v.ndim > 1 else v[j]
    out = _rotate(v, j) - base
    out[..., 0] = 0.0
    out[..., -1] = 0.0
    return LoopPath(out) if isinstance(excursion, LoopPath) else out


def vervaat_forward_refined(bridges: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Forward transform using the continuous-time minimum of each bridge.

    The minimum of every step is drawn from the Brownian-bridge law given its
    endpoints, the step holding the overall minimum gets an exact argmin
    time ``rho``, and the rotated path is read at ``rho + k/n`` by Gaussian
    bridge interpolation inside each step.  Returns ``(size, n + 1)`` values
    pinned to 0 at both ends (interior values are clipped at 0).
    """
    b = np.atleast_2d(np.asarray(bridges, dtype=float))
    size, n = b.shape[0], b.shape[1] - 1
    dt = 1.0 / n
    a0, a1 = b[:, :-1], b[:, 1:]
    mins = bridge_minimum(a0, a1, dt, 1.0 - rng.random(a0.shape))
    r = np.arange(size)
    i = np.argmin(mins, axis=1)
    H = mins[r, i]
    theta = sample_step_argmin(b[r, i], b[r, i + 1], H, dt, np.full(size, dt), rng) / dt
    theta = np.clip(theta, 1e-12, 1 - 1e-12)
    # value at offset theta inside step (i + k) mod n, k = 1..n-1
    steps = (i[:, None] + np.arange(1, n)) % n
    lo = np.take_along_axis(a0, steps, axis=1)
    hi = np.take_along_axis(a1, steps, axis=1)
    th = theta[:, None]
    mean = lo + th * (hi - lo)
    sd = np.sqrt(th * (1 - th) * dt)
    vals = mean + sd * rng.standard_normal(mean.shape) - H[:, None]
    out = np.zeros((size, n + 1))
    out[:, 1:-1] = np.maximum(vals, 0.0)
    return out


def excursion_marginal_density(t: float, x) -> np.ndarray:
    """Density of the excursion at time ``t``: ``2 x^2 exp(-x^2 / (2 t (1 - t))) / sqrt(2 pi t^3 (1 - t)^3)``."""
    x = np.asarray(x, dtype=float)
    val = 2 * x * x / np.sqrt(2 * np.pi * t ** 3 * (1 - t) ** 3) * np.exp(-x * x / (2 * t * (1 - t)))
    return np.where(x > 0, val, 0.0)


def excursion_marginal_cdf(t: float, x) -> np.ndarray:
    """CDF of the excursion at time ``t``: a chi distribution with 3 degrees of freedom, scale ``sqrt(t(1-t))``."""
    return sps.chi.cdf(np.asarray(x, dtype=float), 3, scale=math.sqrt(t * (1 - t)))


def excursion_transition_density(t: float, v: float, x, y) -> np.ndarray:
    """Density of ``X_{t+v}`` at ``y`` given ``X_t = x`` for the excursion.

    ``(p_v(y - x) - p_v(y + x)) (y / x) ((1-t)/(1-t-v))^{3/2}
    exp(x^2 / 2(1-t) - y^2 / 2(1-t-v))``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    s = 1 - t - v
    p = lambda d: np.exp(-d * d / (2 * v)) / math.sqrt(2 * math.pi * v)
    val = (p(y - x) - p(y + x)) * (y / x) * ((1 - t) / s) ** 1.5 * np.exp(x * x / (2 * (1 - t)) - y * y / (2 * s))
    return np.where((x > 0) & (y > 0), val, 0.0)


def excursion_conditional_mean(t: float, v: float, x: float) -> float:
    """``E[X_{t+v} | X_t = x]`` for the excursion by quadrature."""
    top = x + 12 * math.sqrt(v) + 12 * math.sqrt(1 - t - v)
    val, _ = integrate.quad(lambda y: y * float(excursion_transition_density(t, v, x, y)), 0, top, limit=200)
    return val


def tied_argmin_fraction(bridges: np.ndarray) -> float:
    """Fraction of paths whose grid minimum (ignoring the closing point) is attained more than once."""
    core = np.asarray(bridges)[:, :-1]
    m = core.min(axis=1, keepdims=True)
    return float(np.mean(np.sum(core == m, axis=1) > 1))


# ---------------------------------------------------------------------------
# checks


def verify_forward(n_steps: int = 1000, n: int = 10_000, seed: int = 0, refined: bool = True) -> GofReport:
    """KS of the transformed bridge at ``t = 1/2`` against ``16 x^2 exp(-2 x^2) / sqrt(2 pi)``."""
    rng = np.random.default_rng([seed, 21])
    b = sample_bridge01(n_steps, rng, n)
    out = vervaat_forward_refined(b, rng) if refined else vervaat_forward(b)
    return ks_test(out[:, n_steps // 2], lambda x: excursion_marginal_cdf(0.5, x))


def verify_round_trip(n_steps: int = 1000, n: int = 10_000, seed: int = 0) -> dict:
    """Forward-of-inverse identity on sampled excursions, and the bridge midpoint law of the inverse."""
    rng = np.random.default_rng([seed, 22])
    e = sample_excursion01(n_steps, rng, n)
    j = rng.integers(1, n_steps, size=n)
    inv = vervaat_inverse(e, j / n_steps)
    back = vervaat_forward(inv)
    err = float(np.max(np.abs(back - e)))
    ks = ks_test(inv[:, n_steps // 2], lambda x: sps.norm.cdf(x, scale=0.5))
    # (rho_1, -H_1) of the inverse output against (1 - U, X_U)
    core = inv[:, :-1]
    i = np.argmin(core, axis=1)
    rho = i / n_steps
    h = -core[np.arange(n), i]
    ks_rho = ks2_test(rho, 1 - j / n_steps)
    ks_h = ks2_test(h, e[np.arange(n), j])
    return {"max_abs_error": err, "exact": err <= 1e-12, "midpoint_ks": ks.to_dict(),
            "rho_ks": ks_rho.to_dict(), "height_ks": ks_h.to_dict(),
            "passed": err <= 1e-12 and ks.passed()}


def verify_bridge_covariance(n_steps: int = 1000, n: int = 10_000, seed: int = 0) -> dict:
    """Empirical ``var X_{1/2}`` and ``cov(X_{1/4}, X_{3/4})`` against ``u (1 - t)``."""
    rng = np.random.default_rng([seed, 23])
    b = sample_bridge01(n_steps, rng, n)
    q1, q2, q3 = (b[:, n_steps * k // 4] for k in (1, 2, 3))
    var = Welford().add(q2 * q2)
    cov = Welford().add(q1 * q3)
    return {"var_half": var.mean, "var_se": var.se, "var_z": z_score(var.mean, var.se, 0.25, 0.0),
            "cov": cov.mean, "cov_se": cov.se, "cov_z": z_score(cov.mean, cov.se, 1 / 16, 0.0)}
