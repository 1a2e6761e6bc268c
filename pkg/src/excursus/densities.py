"""Time-domain densities: first passage, killed transition, excursion entrance law.

``f(t; x, y)`` is the density of ``T_y`` under ``P^x`` (Lebesgue in ``t``).
``q^y(t; x, z)`` is the transition density of the process killed at ``T_y``,
taken with respect to the speed measure ``m(dz)`` so that it is symmetric.
The entrance law of excursions above ``y`` has density ``q_up(t; x) = f(t; x, y)``
with respect to ``m(dx)``; :func:`entrance_density` also offers an independent
route through the scale derivative of ``q^y`` at the barrier.

Brownian presets use closed forms.  Other specs invert the hitting Laplace
transform by Gaver-Stehfest and build ``q^y`` from a symmetric finite-volume
discretisation of the generator that is exponentiated exactly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from .eigen import solve_eigen_batch
from .spec import LOWER, UPPER, DiffusionSpec

LN2 = math.log(2.0)


class InversionWarning(UserWarning):
    """Consecutive Gaver-Stehfest orders disagree beyond tolerance."""


class AccuracyWarning(UserWarning):
    """A discretised kernel is evaluated below its resolution."""


@lru_cache(maxsize=None)
def stehfest_weights(order: int = 12) -> np.ndarray:
    """Gaver-Stehfest coefficients ``V_1..V_N`` (``N`` even)."""
    if order % 2 or order < 2:
        raise ValueError("Stehfest order must be a positive even integer")
    half = order // 2
    v = np.zeros(order)
    for k in range(1, order + 1):
        acc = 0
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += (j ** half * math.factorial(2 * j)) / (
                math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                * math.factorial(k - j) * math.factorial(2 * j - k))
        v[k - 1] = (-1) ** (k + half) * acc
    return v


def stehfest_invert(transform, t, order: int = 12, check: bool = True, rtol: float = 1e-3) -> np.ndarray:
    """Invert a Laplace transform given as a vectorised callable ``alpha -> F(alpha)``.

    ``transform`` receives a 2-D array of abscissae (order x len(t)) and must
    return an array of the same shape.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = np.arange(1, order + 1)[:, None]
    vals = transform(k * LN2 / t[None, :])
    out = LN2 / t * np.sum(stehfest_weights(order)[:, None] * vals, axis=0)
    if check:
        low = stehfest_invert(transform, t, order - 2, check=False)
        _check_orders(out, low, rtol)
    return out


def _check_orders(high, low, rtol):
    scale = max(float(np.max(np.abs(high))), 1e-300)
    gap = np.abs(high - low) / np.maximum(np.abs(high), 1e-3 * scale)
    if np.any(gap > rtol):
        warnings.warn(f"Stehfest inversion unstable: orders N and N-2 differ by {np.max(gap):.2e} (relative)",
                      InversionWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# first passage


def _gauss(t, d):
    return np.exp(-d * d / (2 * t)) / np.sqrt(2 * np.pi * t)


def _brownian_closed(spec: DiffusionSpec, x, y) -> bool:
    if spec.family == "brownian":
        return True
    if spec.family == "brownian-absorbed":
        return bool(np.all(np.asarray(y) >= spec.interval.lower) and np.all(np.asarray(x) >= np.asarray(y)))
    return False


def _passage_laplace_batch(spec: DiffusionSpec, alphas: np.ndarray, x, y: float) -> np.ndarray:
    """``E^x exp(-alpha T_y)`` for alphas (flat) and states x (array); shape (n_alpha, n_x)."""
    batch = solve_eigen_batch(spec, alphas)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((alphas.size, x.size))
    up, down = x <= y, x > y
    if np.any(up):
        out[:, up] = np.exp(batch.log_g1(x[up]) - batch.log_g1(y)[:, None])
    if np.any(down):
        out[:, down] = np.exp(batch.log_g2(x[down]) - batch.log_g2(y)[:, None])
    return out


def _stehfest_passage(spec: DiffusionSpec, t, x, y: float, order: int, rtol: float = 1e-3) -> np.ndarray:
    """Stehfest density on the outer product ``t`` x ``x`` (shape (n_t, n_x))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k = np.arange(1, order + 1)
    alphas = (k[:, None] * LN2 / t[None, :]).ravel()
    lap = _passage_laplace_batch(spec, alphas, x, y).reshape(order, t.size, x.size)
    res = {}
    for n in (order, order - 2):
        v = stehfest_weights(n)
        res[n] = LN2 / t[:, None] * np.einsum("k,ktx->tx", v, lap[:n])
    _check_orders(res[order], res[order - 2], rtol)
    return np.maximum(res[order], 0.0)


def first_passage_density(spec: DiffusionSpec, t, x: float, y: float, *, order: int = 12) -> np.ndarray:
    """Density ``f(t; x, y)`` of ``T_y`` under ``P^x`` for an array of times.

    Closed form for Brownian presets (drift ``mu``, kill rate ``beta``):
    ``|y-x| (2 pi t^3)^{-1/2} exp(-(y - x - mu t)^2 / 2t - beta t)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    if x == y:
        raise ValueError("x and y must differ")
    if _brownian_closed(spec, x, y):
        d = y - x
        return abs(d) / t * _gauss(t, d - spec.mu * t) * np.exp(-spec.beta * t)
    flat = t.ravel()
    return _stehfest_passage(spec, flat, [x], y, order)[:, 0].reshape(t.shape)


def passage_density_field(spec: DiffusionSpec, t: float, xs, y: float, *, order: int = 12) -> np.ndarray:
    """``f(t; x, y)`` for a fixed time and many starting states ``xs``."""
    xs = np.asarray(xs, dtype=float)
    if _brownian_closed(spec, xs, y):
        d = y - xs
        return np.abs(d) / t * _gauss(t, d - spec.mu * t) * np.exp(-spec.beta * t)
    return _stehfest_passage(spec, [t], xs.ravel(), y, order)[0].reshape(xs.shape)


def hit_probability(spec: DiffusionSpec, x: float, y: float) -> float:
    """``P^x(T_y < inf)`` from the scale function (no killing) or the alpha -> 0 eigenfunction."""
    from .eigen import ruin_function
    if spec.kill_free:
        if x < y:
            up = spec.boundary(UPPER)
            lo = spec.boundary(LOWER)
            if not np.isfinite(lo.scale_at_end):
                return 1.0
            return float((spec.scale(np.array(x)) - lo.scale_at_end) / (spec.scale(np.array(y)) - lo.scale_at_end))
        if not np.isfinite(spec.boundary(UPPER).scale_at_end):
            return 1.0
    if x > y:
        rf = ruin_function(spec)
        return float(rf.hit_probability(x, y))
    return float(_passage_laplace_batch(spec, np.array([0.0]), [x], y)[0, 0])


@dataclass(frozen=True)
class PassageCDF:
    """Tabulated ``P^x(T_y <= t)`` on ``[0, t_max]`` with an inverse for sampling."""

    t: np.ndarray
    cdf: np.ndarray
    total: float  # P^x(T_y < inf)

    def __call__(self, s):
        return np.interp(s, self.t, self.cdf)

    def inverse(self, p) -> np.ndarray:
        """Quantile function on ``[0, cdf[-1]]`` by linear interpolation."""
        c = np.maximum.accumulate(self.cdf)
        keep = np.concatenate([[True], np.diff(c) > 0])
        return np.interp(p, c[keep], self.t[keep])


def passage_cdf(spec: DiffusionSpec, x: float, y: float, t_max: Optional[float] = None,
                n: int = 2000, tol: float = 1e-7) -> PassageCDF:
    """Cumulative first-passage distribution by quadrature of the density.

    The time grid is geometric from ``1e-4 (x - y)^2``; without ``t_max`` it is
    doubled until the tabulated mass reaches ``P^x(T_y < inf)`` within ``tol``.
    """
    total = hit_probability(spec, x, y)
    d2 = (x - y) ** 2
    t_lo = 1e-4 * d2
    t_hi = t_max if t_max is not None else max(8.0 * d2, 1.0)
    while True:
        lt = np.linspace(math.log(t_lo), math.log(t_hi), n)
        tt = np.exp(lt)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InversionWarning)
            f = first_passage_density(spec, tt, x, y)
        cdf = integrate.cumulative_trapezoid(f * tt, lt, initial=0.0)
        if t_max is not None or cdf[-1] >= total * (1 - tol) or t_hi > 1e7:
            break
        t_hi *= 4.0
        n = n + 500
    t = np.concatenate([[0.0], tt])
    return PassageCDF(t, np.concatenate([[0.0], cdf]), total)


# ---------------------------------------------------------------------------
# killed transition density


class KilledGenerator:
    """Finite-volume generator on the side of a barrier, exponentiated exactly.

    Nodes ``z_1..z_K`` are spaced ``h`` away from the barrier ``y`` (value 0
    imposed at ``y``); the far end of the working window reflects.  With
    masses ``M_i = m'(z_i) h`` and fluxes ``1/(s(z_{i+1}) - s(z_i))`` the
    matrix ``M^{1/2} L M^{-1/2}`` is symmetric tridiagonal, so
    ``q(t; z_i, z_j) = sum_k exp(lam_k t) V_ik V_jk / sqrt(M_i M_j)``.
    """

    def __init__(self, spec: DiffusionSpec, y: float, side: str = UPPER, h: Optional[float] = None):
        lo, hi = spec.window
        h = spec.h if h is None else float(h)
        if side == UPPER:
            if not lo - 1e-12 <= y < hi:
                raise ValueError("barrier outside the working window")
            K = int(math.floor((hi - y) / h + 1e-9))
            z = y + h * np.arange(1, K + 1)
        else:
            if not lo < y <= hi + 1e-12:
                raise ValueError("barrier outside the working window")
            K = int(math.floor((y - lo) / h + 1e-9))
            z = y - h * np.arange(K, 0, -1)
        if K < 4:
            raise ValueError("too few nodes between barrier and window edge")
        self.spec, self.y, self.side, self.h, self.z = spec, float(y), side, h, z
        s = spec.scale(z)
        sy = float(spec.scale(np.array(y)))
        mass = spec.speed_density(z) * h
        c = np.broadcast_to(spec.kill_rate(z), z.shape)
        inv_ds = 1.0 / np.diff(s)
        if side == UPPER:
            mass[-1] *= 0.5
            to_barrier = 1.0 / (s[0] - sy)
            out_flux = np.concatenate([[to_barrier], np.zeros(K - 1)])
        else:
            mass[0] *= 0.5
            to_barrier = 1.0 / (sy - s[-1])
            out_flux = np.concatenate([np.zeros(K - 1), [to_barrier]])
        diag = -(np.concatenate([[0.0], inv_ds]) + np.concatenate([inv_ds, [0.0]]) + out_flux) / mass - c
        off = inv_ds / np.sqrt(mass[:-1] * mass[1:])
        self.lam, self.V = eigh_tridiagonal(diag, off)
        self.mass = mass
        self.sqrt_mass = np.sqrt(mass)
        self.scale_gap = np.abs(s - sy)

    def _locate(self, p):
        """Bilinear weights: node indices (i0, i1) and weights (w0, w1); index -1 means the barrier."""
        p = np.asarray(p, dtype=float)
        pos = (p - self.y) / self.h if self.side == UPPER else (self.y - p) / self.h
        K = self.z.size
        if np.any(pos < -1e-9) or np.any(pos > K + 1e-9):
            raise ValueError("point outside the killed domain")
        j = np.clip(np.floor(pos).astype(int), 0, K - 1)
        frac = np.clip(pos - j, 0.0, 1.0)
        # node number j sits at distance j*h; node j <-> array index j-1 (UPPER)
        to_idx = (lambda n: n - 1) if self.side == UPPER else (lambda n: K - n)
        i0 = np.where(j >= 1, to_idx(np.maximum(j, 1)), -1)
        i1 = to_idx(np.minimum(j + 1, K))
        return i0, i1, 1.0 - frac, frac

    def node_matrix(self, t: float) -> np.ndarray:
        """``q(t; z_i, z_j)`` on all node pairs."""
        U = self.V * np.exp(self.lam * t)
        return (U @ self.V.T) / np.outer(self.sqrt_mass, self.sqrt_mass)

    def _node_values(self, t, i, j):
        vi = self.V[np.maximum(i, 0)]
        vj = self.V[np.maximum(j, 0)]
        val = np.sum(vi * vj * np.exp(self.lam * np.asarray(t)[..., None]), axis=-1)
        val = val / (self.sqrt_mass[np.maximum(i, 0)] * self.sqrt_mass[np.maximum(j, 0)])
        return np.where((i < 0) | (j < 0), 0.0, val)

    def density(self, t, x, z) -> np.ndarray:
        t, x, z = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(z, float))
        a0, a1, wa0, wa1 = self._locate(x)
        b0, b1, wb0, wb1 = self._locate(z)
        out = (wa0 * wb0 * self._node_values(t, a0, b0) + wa0 * wb1 * self._node_values(t, a0, b1)
               + wa1 * wb0 * self._node_values(t, a1, b0) + wa1 * wb1 * self._node_values(t, a1, b1))
        return out

    def apply_resolvent(self, alpha: float, f) -> np.ndarray:
        """``V^alpha f`` on the nodes: ``int v(z_i, w) f(w) m(dw)``."""
        fv = np.asarray(f(self.z), dtype=float) if callable(f) else np.asarray(f, dtype=float)
        coef = (self.V.T @ (self.sqrt_mass * fv)) / (alpha - self.lam)
        return (self.V @ coef) / self.sqrt_mass

    def barrier_derivative(self, t, x) -> np.ndarray:
        """``lim q(t; y + d, x) / |s(y + d) - s(y)|`` from the two nodes nearest the barrier."""
        t = np.asarray(t, dtype=float)
        K = self.z.size
        near = (0, 1) if self.side == UPPER else (K - 1, K - 2)
        r = []
        for idx in near:
            zi = np.full(np.shape(np.broadcast_arrays(t, x)[0]), self.z[idx])
            r.append(self.density(t, zi, x) / self.scale_gap[idx])
        return 2 * r[0] - r[1]


def killed_generator(spec: DiffusionSpec, y: float, side: str = UPPER) -> KilledGenerator:
    key = ("killed", float(y), side)
    if key not in spec._cache:
        spec._cache[key] = KilledGenerator(spec, y, side)
    return spec._cache[key]


def killed_density(spec: DiffusionSpec, t, x, z, y: float) -> np.ndarray:
    """``q^y(t; x, z)`` with respect to ``m(dz)``; zero unless ``x`` and ``z`` lie above ``y``.

    Brownian presets use the image formula
    ``exp(mu (z - x) - mu^2 t/2 - beta t) [p_t(z - x) - p_t(z + x - 2y)] / m'(z)``.
    """
    t, x, z = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(z, float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    above = (x > y) & (z > y)
    if _brownian_closed(spec, np.maximum(x, y), y):
        mu, beta = spec.mu, spec.beta
        val = (np.exp(mu * (z - x) - (0.5 * mu * mu + beta) * t)
               * (_gauss(t, z - x) - _gauss(t, z + x - 2 * y)) / spec.speed_density(z))
        return np.where(above, val, 0.0)
    gen = killed_generator(spec, y)
    if np.any(np.sqrt(t[above]) < 3 * gen.h) if np.any(above) else False:
        warnings.warn("killed density evaluated at t below grid resolution (sqrt(t) < 3h)", AccuracyWarning, stacklevel=2)
    out = np.zeros(t.shape)
    if np.any(above):
        out[above] = gen.density(t[above], np.minimum(x[above], gen.z[-1]), np.minimum(z[above], gen.z[-1]))
    return np.maximum(out, 0.0)


def killed_resolvent_apply(spec: DiffusionSpec, alpha: float, f, y: float, x: float) -> float:
    """``V^alpha_y f(x) = P^x int_0^{T_y} e^{-alpha t} f(X_t) dt`` from the discretised generator."""
    side = UPPER if x > y else LOWER
    gen = killed_generator(spec, y, side)
    vals = gen.apply_resolvent(alpha, f)
    nodes = gen.z
    pts = np.concatenate([[y], nodes]) if side == UPPER else np.concatenate([nodes, [y]])
    v = np.concatenate([[0.0], vals]) if side == UPPER else np.concatenate([vals, [0.0]])
    return float(np.interp(x, pts, v))


# ---------------------------------------------------------------------------
# entrance law


def entrance_density(spec: DiffusionSpec, t, x, y: float, method: str = "passage", delta: float = 1e-2) -> np.ndarray:
    """Density ``q_up(t; x)`` of the excursion entrance law above ``y`` w.r.t. ``m(dx)``.

    ``method="passage"`` evaluates ``f(t; x, y)``.  ``method="kernel"``
    computes the barrier scale-derivative of the killed density,
    ``lim q^y(t; y + d, x) / (s(y + d) - s(y))``, by Richardson extrapolation
    (Brownian presets) or from the generator nodes next to the barrier.
    """
    t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
    above = x > y
    out = np.zeros(t.shape)
    if not np.any(above):
        return out
    ta, xa = t[above], x[above]
    if method == "passage":
        if _brownian_closed(spec, xa, y):
            d = y - xa
            vals = np.abs(d) / ta * _gauss(ta, d - spec.mu * ta) * np.exp(-spec.beta * ta)
        else:
            vals = np.array([first_passage_density(spec, np.array([ti]), xi, y)[0] for ti, xi in zip(ta, xa)])
    elif method == "kernel":
        if _brownian_closed(spec, xa, y):
            sy = float(spec.scale(np.array(y)))

            def ratio(d):
                return killed_density(spec, ta, np.full_like(xa, y + d), xa, y) / (spec.scale(np.array(y + d)) - sy)

            r1, r2, r4 = ratio(delta), ratio(delta / 2), ratio(delta / 4)
            # error expansion in even and odd powers of d: eliminate d and d^2
            a = 2 * r2 - r1
            b = 2 * r4 - r2
            vals = (4 * b - a) / 3
        else:
            vals = killed_generator(spec, y).barrier_derivative(ta, xa)
    else:
        raise ValueError("method must be 'passage' or 'kernel'")
    out[above] = vals
    return out


def excursion_tail_mass(spec: DiffusionSpec, y: float, eps: float) -> float:
    """``n_up_y(zeta > eps) = int f(eps; z, y) m(dz)`` over ``z > y`` (includes escaping excursions)."""
    if _brownian_closed(spec, y + 1.0, y):
        mu = spec.mu
        top = y + abs(mu) * eps + 40 * math.sqrt(eps)
        if np.isfinite(spec.interval.upper):
            top = min(top, spec.interval.upper)
        fn = lambda z: float(passage_density_field(spec, eps, np.array(z), y) * spec.speed_density(np.array(z)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            val, _ = integrate.quad(fn, y, top, points=[y + mu * eps] if y < y + mu * eps < top else None, limit=200)
        return val
    x = spec.grid
    hi = x[-1]
    z = np.linspace(y, hi, 4 * int(round((hi - y) / spec.h)) + 1)[1:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InversionWarning)
        f = passage_density_field(spec, eps, z, y)
    integrand = np.concatenate([[0.0], f * spec.speed_density(z)])
    return float(integrate.simpson(integrand, x=np.concatenate([[y], z])))
