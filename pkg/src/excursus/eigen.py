"""Eigenfunctions of the generator and the resolvent-level analytics built on them.

For ``alpha >= 0`` the equation ``G g = alpha g`` has an increasing solution
``g1`` and a decreasing solution ``g2``.  Both are computed in log space: with
``w = g'/g`` the equation becomes the Riccati equation

    w' = 2 (alpha + c) / sigma^2 - w^2 - 2 b w / sigma^2,

integrated by RK4 together with ``log g``.  ``g1`` is integrated upward from
the lower window edge and ``g2`` downward from the upper edge; in those
directions the Riccati flow is attracting, so start-up errors die out.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .spec import LOWER, UPPER, DiffusionSpec, SpecError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


class EigenError(RuntimeError):
    """Eigenfunction problem that cannot be solved for the given spec."""


class NotTransientError(EigenError):
    """The diffusion is not upward-transient, so no ruin function exists."""


class TruncationWarning(UserWarning):
    """The working window cuts off a non-negligible part of an integral."""


# ---------------------------------------------------------------------------
# tabulated functions


@dataclass(frozen=True)
class GridFunction:
    """Values on a grid with linear interpolation in between."""

    x: np.ndarray
    values: np.ndarray

    def __call__(self, z):
        return np.interp(np.asarray(z, dtype=float), self.x, self.values)


def _hermite(x: np.ndarray, phi: np.ndarray, w: np.ndarray, z) -> np.ndarray:
    """Cubic Hermite interpolation of ``phi`` (slope ``w``) at ``z``; trailing axis is the grid."""
    z = np.asarray(z, dtype=float)
    h = x[1] - x[0]
    tol = 1e-9 * max(1.0, abs(x[-1]))
    if np.any(z < x[0] - tol) or np.any(z > x[-1] + tol):
        raise ValueError(f"evaluation point outside the working window [{x[0]}, {x[-1]}]")
    i = np.clip(((z - x[0]) / h).astype(int), 0, x.size - 2)
    t = np.clip((z - x[i]) / h, 0.0, 1.0)
    t2, t3 = t * t, t * t * t
    h00, h10 = 2 * t3 - 3 * t2 + 1, t3 - 2 * t2 + t
    h01, h11 = -2 * t3 + 3 * t2, t3 - t2
    return (h00 * phi[..., i] + h10 * h * w[..., i] + h01 * phi[..., i + 1] + h11 * h * w[..., i + 1])


def _coefficients(spec: DiffusionSpec, z: np.ndarray):
    s2 = spec.sigma2(z)
    c = np.broadcast_to(spec.kill_rate(z), z.shape)
    return 2.0 / s2, 2.0 * spec.drift(z) / s2, c


def _boundary_slope(spec: DiffusionSpec, alphas: np.ndarray, end: str) -> np.ndarray:
    """Starting value of ``w = g'/g`` at the window edge on the side of ``end``."""
    lo, hi = spec.window
    x = lo if end == LOWER else hi
    e = spec.interval.lower if end == LOWER else spec.interval.upper
    xa = np.array(x)
    b = float(spec.drift(xa))
    s2 = float(spec.sigma2(xa))
    c = float(np.broadcast_to(spec.kill_rate(xa), ()))
    sp = float(spec.scale_derivative(xa))
    sign = 1.0 if end == LOWER else -1.0
    robin = (-b + sign * np.sqrt(b * b + 2 * s2 * (alphas + c))) / s2
    if not np.isfinite(e):
        return robin
    if x == e:
        raise EigenError(f"window edge coincides with the {end} endpoint; move it inside the interval")
    if end == UPPER and spec.interval.upper_in_E:
        return np.zeros_like(alphas)
    kind = spec.boundary(end).kind
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if kind in ("exit", "regular-absorbing"):
            # g ~ ds + (alpha + c) int (s(x) - s(z)) ds(z) m(dz): one Picard step from the end
            sp_f = lambda z: float(spec.scale_derivative(np.array(z)))
            m_f = lambda z: float(spec.speed_density(np.array(z)))
            dist = lambda z: abs(integrate.quad(sp_f, min(z, e), max(z, e), limit=200)[0])
            gap = dist(x)
            i1, _ = integrate.quad(lambda z: dist(z) * m_f(z), min(x, e), max(x, e), limit=100)
            i2, _ = integrate.quad(lambda z: (gap - dist(z)) * dist(z) * m_f(z), min(x, e), max(x, e), limit=100)
            return sign * sp * (1 + (alphas + c) * i1) / (gap + (alphas + c) * i2)
        if kind == "entrance":
            mass, _ = integrate.quad(lambda z: float(spec.speed_density(np.array(z))), min(x, e), max(x, e), limit=200)
            return sign * sp * (alphas + c) * mass
    return robin


def _riccati(spec: DiffusionSpec, alphas: np.ndarray, end: str):
    """Integrate the Riccati system away from ``end``; returns ``(w, phi)`` of shape (n_alpha, n_grid)."""
    x = spec.grid
    n = x.size
    w = np.array(_boundary_slope(spec, alphas, end), dtype=float)
    phi = np.zeros_like(w)
    W = np.empty((alphas.size, n))
    P = np.empty((alphas.size, n))
    order = list(range(n) if end == LOWER else range(n - 1, -1, -1))
    W[:, order[0]] = w
    P[:, order[0]] = 0.0
    for k_prev, k in zip(order[:-1], order[1:]):
        x0, x1 = x[k_prev], x[k]
        h = x1 - x0
        qa, pa, ca = _coefficients(spec, np.array([x0]))
        wmax = float(np.max(np.abs(w)))
        rate = wmax + abs(float(pa[0])) + math.sqrt(float(qa[0]) * (float(np.max(alphas)) + float(ca[0])))
        n_sub = max(1, int(math.ceil(abs(h) * rate / 0.02)))
        dh = h / n_sub
        zs = x0 + dh * np.arange(0, 2 * n_sub + 1) / 2.0
        q, p, c = _coefficients(spec, zs)
        for j in range(n_sub):
            i0 = 2 * j
            def f(ww, i):
                return q[i] * (alphas + c[i]) - ww * ww - p[i] * ww
            k1 = f(w, i0)
            k2 = f(w + 0.5 * dh * k1, i0 + 1)
            k3 = f(w + 0.5 * dh * k2, i0 + 1)
            k4 = f(w + dh * k3, i0 + 2)
            phi = phi + (dh / 6.0) * (6 * w + dh * (k1 + k2 + k3))
            w = w + (dh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(w)):
            raise EigenError(f"Riccati integration blew up near x={x1:.6g}")
        W[:, k] = w
        P[:, k] = phi
    return W, P


@dataclass(frozen=True, eq=False)
class EigenBatch:
    """``g1``, ``g2`` for several ``alpha`` at once, in log form.

    ``phi1 = log g1``, ``w1 = g1'/g1`` (Lebesgue derivatives), same for ``g2``;
    normalised so that ``g1(x0) = g2(x0) = 1``.
    """

    spec: DiffusionSpec
    alphas: np.ndarray
    x: np.ndarray
    x0: float
    phi1: np.ndarray
    phi2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    log_wronskian: np.ndarray  # pointwise, shape (n_alpha, n_grid)

    @property
    def W(self) -> np.ndarray:
        return np.exp(np.mean(self.log_wronskian, axis=1))

    def log_g1(self, z) -> np.ndarray:
        return _hermite(self.x, self.phi1, self.w1, z)

    def log_g2(self, z) -> np.ndarray:
        return _hermite(self.x, self.phi2, self.w2, z)

    def hitting(self, x: float, y: float) -> np.ndarray:
        """``E^x exp(-alpha T_y)`` for every alpha in the batch."""
        if x <= y:
            return np.exp(self.log_g1(x) - self.log_g1(y))
        return np.exp(self.log_g2(x) - self.log_g2(y))

    def pair(self, i: int) -> "EigenPair":
        return EigenPair(
            spec=self.spec, alpha=float(self.alphas[i]), x=self.x, x0=self.x0,
            phi1=self.phi1[i], phi2=self.phi2[i], w1=self.w1[i], w2=self.w2[i],
            log_wronskian=self.log_wronskian[i],
        )


def solve_eigen_batch(spec: DiffusionSpec, alphas, x0: Optional[float] = None) -> EigenBatch:
    if spec.sde_only:
        raise SpecError("eigenfunctions need the scale/speed form of the spec")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if np.any(alphas < 0):
        raise ValueError("alpha must be nonnegative")
    x = spec.grid
    x0 = 0.5 * (x[0] + x[-1]) if x0 is None else float(x0)
    w1, p1 = _riccati(spec, alphas, LOWER)
    w2, p2 = _riccati(spec, alphas, UPPER)
    p1 = p1 - _hermite(x, p1, w1, x0)[:, None]
    p2 = p2 - _hermite(x, p2, w2, x0)[:, None]
    diff = w1 - w2
    if np.any(diff <= 0):
        raise EigenError("g1 and g2 are not linearly independent on the grid")
    logw = p1 + p2 + np.log(diff) - np.log(spec.scale_derivative(x))[None, :]
    return EigenBatch(spec, alphas, x, x0, p1, p2, w1, w2, logw)


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Increasing/decreasing eigenfunctions for a single ``alpha``."""

    spec: DiffusionSpec
    alpha: float
    x: np.ndarray
    x0: float
    phi1: np.ndarray
    phi2: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    log_wronskian: np.ndarray

    @property
    def g1(self) -> np.ndarray:
        return np.exp(self.phi1)

    @property
    def g2(self) -> np.ndarray:
        return np.exp(self.phi2)

    @property
    def g1_plus(self) -> np.ndarray:
        """Scale derivative ``dg1/ds`` on the grid."""
        return self.g1 * self.w1 / self.spec.scale_derivative(self.x)

    @property
    def g2_plus(self) -> np.ndarray:
        return self.g2 * self.w2 / self.spec.scale_derivative(self.x)

    @property
    def W(self) -> float:
        return float(np.exp(np.mean(self.log_wronskian)))

    @property
    def wronskian_deviation(self) -> float:
        """Max relative deviation of the pointwise Wronskian from its mean."""
        return float(np.max(np.abs(np.expm1(self.log_wronskian - np.log(self.W)))))

    def log_g1(self, z) -> np.ndarray:
        return _hermite(self.x, self.phi1, self.w1, z)

    def log_g2(self, z) -> np.ndarray:
        return _hermite(self.x, self.phi2, self.w2, z)

    def table(self) -> dict:
        return {"x": self.x, "g1": self.g1, "g2": self.g2, "g1_plus": self.g1_plus, "g2_plus": self.g2_plus}


def solve_eigenfunctions(spec: DiffusionSpec, alpha: float, x0: Optional[float] = None) -> EigenPair:
    """Tabulate ``g1``, ``g2`` for ``G g = alpha g`` on the spec's grid.

    Parameters
    ----------
    spec : DiffusionSpec
    alpha : float
        Positive rate.
    x0 : float, optional
        Anchor where ``g1 = g2 = 1``; defaults to the window midpoint.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return solve_eigen_batch(spec, [alpha], x0=x0).pair(0)


# ---------------------------------------------------------------------------
# resolvent quantities


def resolvent_density(pair: EigenPair, x, y) -> np.ndarray:
    """``u^alpha(x, y) = g1(min) g2(max) / W``, density with respect to ``m``."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    return np.exp(pair.log_g1(lo) + pair.log_g2(hi)) / pair.W


def hitting_laplace(pair: EigenPair, x: float, y: float) -> float:
    """``E^x exp(-alpha T_y)``."""
    if x <= y:
        return float(np.exp(pair.log_g1(x) - pair.log_g1(y)))
    return float(np.exp(pair.log_g2(x) - pair.log_g2(y)))


FunctionLike = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, float]


def _as_callable(f: FunctionLike, x: np.ndarray):
    if callable(f):
        return lambda z: np.broadcast_to(np.asarray(f(z), dtype=float), np.shape(z))
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return lambda z: np.full(np.shape(z), float(arr))
    if arr.shape != x.shape:
        raise ValueError("tabulated f must live on the spec grid")
    return lambda z: np.interp(z, x, arr)


def _cell_nodes(x: np.ndarray):
    """Gauss-Legendre nodes (n_cells, k) and weights for every grid cell."""
    h = x[1] - x[0]
    mid = 0.5 * (x[:-1] + x[1:])
    return mid[:, None] + 0.5 * h * _GL_NODES[None, :], 0.5 * h * _GL_WEIGHTS


def _tail_estimate(pair: EigenPair, sup_f: float):
    """Mass of the resolvent integrals outside the window, per unit of g1(x)/W resp. g2(x)/W."""
    spec = pair.spec
    x = pair.x
    lo, hi = x[0], x[-1]
    out = []
    for edge, phi, w, e, sgn in ((lo, pair.phi1[0], pair.w1[0], spec.interval.lower, -1.0),
                                 (hi, pair.phi2[-1], pair.w2[-1], spec.interval.upper, 1.0)):
        m = float(spec.speed_density(np.array(edge)))
        dh = 1e-4 * max(1.0, abs(edge))
        dlogm = float(np.log(spec.speed_density(np.array(edge + dh))) - np.log(spec.speed_density(np.array(edge - dh)))) / (2 * dh)
        rate = sgn * (w + dlogm)  # log-slope of the integrand moving outward
        dist = abs(e - edge)
        if rate < 0:
            dist = min(dist, 1.0 / -rate)
        out.append(math.exp(phi) * m * sup_f * dist if np.isfinite(dist) else math.inf)
    return out


def resolvent_apply(pair: EigenPair, f: FunctionLike, tol: float = 1e-4) -> GridFunction:
    """``U^alpha f(x) = int u^alpha(x, y) f(y) m(dy)`` on the grid.

    Integrals over the window use Gauss-Legendre on each grid cell with the
    log-eigenfunctions interpolated by cubic Hermite, accumulated by a
    rescaled recursion that never forms ``g1`` or ``g2`` on their own.
    A :class:`TruncationWarning` is emitted if mass outside the window could
    exceed ``tol`` relative to the result in the central half of the window.
    """
    x = pair.x
    fn = _as_callable(f, x)
    nodes, wts = _cell_nodes(x)
    fm = fn(nodes) * pair.spec.speed_density(nodes)
    l1 = pair.log_g1(nodes)
    l2 = pair.log_g2(nodes)
    # A_k = int_{lo}^{x_k} g1(z)/g1(x_k) f m'(z) dz, B_k analogous with g2 from above
    cellA = np.sum(wts * fm * np.exp(l1 - pair.phi1[1:, None]), axis=1)
    cellB = np.sum(wts * fm * np.exp(l2 - pair.phi2[:-1, None]), axis=1)
    n = x.size
    A = np.zeros(n)
    B = np.zeros(n)
    decay1 = np.exp(pair.phi1[:-1] - pair.phi1[1:])
    decay2 = np.exp(pair.phi2[1:] - pair.phi2[:-1])
    for k in range(1, n):
        A[k] = A[k - 1] * decay1[k - 1] + cellA[k - 1]
    for k in range(n - 2, -1, -1):
        B[k] = B[k + 1] * decay2[k] + cellB[k]
    vals = np.exp(pair.phi1 + pair.phi2) * (A + B) / pair.W
    sup_f = float(np.max(np.abs(fn(nodes)))) if nodes.size else 0.0
    t_lo, t_hi = _tail_estimate(pair, sup_f)
    central = slice(n // 4, 3 * n // 4 + 1)
    tail = (t_lo * np.exp(pair.phi2[central]) + t_hi * np.exp(pair.phi1[central])) / pair.W
    scale = max(float(np.max(np.abs(vals[central]))), 1e-300)
    if np.max(tail) > tol * scale:
        warnings.warn(f"working window truncates resolvent mass (relative tail up to {np.max(tail) / scale:.2e})",
                      TruncationWarning, stacklevel=2)
    return GridFunction(x, vals)


def _integrate_segment(pair: EigenPair, a: float, b: float, integrand) -> float:
    """Composite Gauss-Legendre over ``[a, b]`` aligned with the grid cells."""
    if b <= a:
        return 0.0
    x = pair.x
    inner = x[(x > a) & (x < b)]
    pts = np.concatenate([[a], inner, [b]])
    lo, hi = pts[:-1], pts[1:]
    half = 0.5 * (hi - lo)
    z = (0.5 * (lo + hi))[:, None] + half[:, None] * _GL_NODES[None, :]
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * integrand(z)))


def excursion_resolvent(pair: EigenPair, y: float, f: FunctionLike, tol: float = 1e-4) -> float:
    """``W^alpha f(y)``: the two ``g``-ratio quadratures against ``m`` on either side of ``y``."""
    x = pair.x
    if not x[0] < y < x[-1]:
        raise ValueError("y must be interior to the working window")
    fn = _as_callable(f, x)
    m = pair.spec.speed_density
    l1y, l2y = float(pair.log_g1(y)), float(pair.log_g2(y))
    below = _integrate_segment(pair, x[0], y, lambda z: np.exp(pair.log_g1(z) - l1y) * fn(z) * m(z))
    above = _integrate_segment(pair, y, x[-1], lambda z: np.exp(pair.log_g2(z) - l2y) * fn(z) * m(z))
    total = below + above
    sup_f = float(np.max(np.abs(fn(x))))
    t_lo, t_hi = _tail_estimate(pair, sup_f)
    tail = t_lo * math.exp(-l1y) + t_hi * math.exp(-l2y)
    if tail > tol * max(abs(total), 1e-300):
        warnings.warn(f"working window truncates excursion-resolvent mass (relative tail {tail / max(abs(total), 1e-300):.2e})",
                      TruncationWarning, stacklevel=2)
    return total


# ---------------------------------------------------------------------------
# ruin function


@dataclass(frozen=True, eq=False)
class RuinFunction:
    """Positive decreasing ``r`` with ``G r = 0`` and ``r(x0) = 1``.

    ``log_r`` and ``w = r'/r`` are tabulated on the grid; ``transient`` is
    False for the degenerate constant solution of a non-transient spec.
    """

    spec: DiffusionSpec
    x: np.ndarray
    x0: float
    log_r: np.ndarray
    w: np.ndarray
    transient: bool = True
    _tail: Optional[Callable] = field(default=None, repr=False)
    tail_scale: float = 1.0

    def r(self, z) -> np.ndarray:
        return np.exp(self.log_r_at(z))

    def log_r_at(self, z) -> np.ndarray:
        if self._tail is not None:
            return np.log(self._tail(z))
        return _hermite(self.x, self.log_r, self.w, z)

    def w_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self._tail is not None:
            return -self.spec.scale_derivative(z) / (self._tail(z) * self.tail_scale)
        return np.interp(z, self.x, self.w)

    def r_plus(self, z) -> np.ndarray:
        """Scale derivative ``dr/ds``."""
        z = np.asarray(z, dtype=float)
        return self.r(z) * self.w_at(z) / self.spec.scale_derivative(z)

    def hit_probability(self, x, y) -> np.ndarray:
        """``P^x(T_y < inf) = r(x)/r(y)`` for ``x > y`` (and 1 for ``x <= y`` when killing is absent)."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        return np.where(x > y, np.exp(self.log_r_at(x) - self.log_r_at(y)), 1.0)

    def generator_residual(self) -> float:
        """Max of ``|d r^+/dx - c r m'|`` relative to ``max |r^+|`` on interior grid points."""
        x = self.x
        rp = self.r_plus(x)
        d = np.gradient(rp, x, edge_order=2)
        src = np.broadcast_to(self.spec.kill_rate(x), x.shape) * self.r(x) * self.spec.speed_density(x)
        scale = max(float(np.max(np.abs(rp))), 1e-300)
        return float(np.max(np.abs(d - src)[2:-2]) / scale)


class _ScaleTail:
    """``T(z) = s(B) - s(z)`` computed as ``int_z^B s'`` without cancellation."""

    def __init__(self, spec: DiffusionSpec, tail_hi: float):
        self.spec = spec
        x = spec.grid
        self.x = x
        nodes, wts = _cell_nodes(x)
        cells = np.sum(wts * spec.scale_derivative(nodes), axis=1)
        self.T = tail_hi + np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        x = self.x
        h = x[1] - x[0]
        if np.any(z < x[0] - 1e-9) or np.any(z > x[-1] + 1e-9):
            raise ValueError("evaluation point outside the working window")
        i = np.clip(((z - x[0]) / h).astype(int), 0, x.size - 2)
        a, b = x[i], np.maximum(z, x[i])
        half = 0.5 * (b - a)
        nd = (0.5 * (a + b))[..., None] + half[..., None] * _GL_NODES
        part = half * np.sum(_GL_WEIGHTS * self.spec.scale_derivative(nd), axis=-1)
        return self.T[i] - part


def ruin_function(spec: DiffusionSpec, x0: Optional[float] = None, *, strict: bool = True) -> RuinFunction:
    """Decreasing solution of ``G r = 0`` normalised at ``x0``.

    Without killing ``r(x) = (s(B) - s(x)) / (s(B) - s(x0))``, which requires
    ``s(B) < inf`` (upward transience).  With killing the decreasing
    solution is integrated directly from the upper boundary condition.
    Raises :class:`NotTransientError` for a non-transient spec unless
    ``strict=False``, in which case the constant function is returned.
    """
    if spec.sde_only:
        raise SpecError("the ruin function needs the scale/speed form of the spec")
    x = spec.grid
    x0 = 0.5 * (x[0] + x[-1]) if x0 is None else float(x0)
    if spec.kill_free:
        upper = spec.boundary(UPPER)
        if spec.interval.upper_in_E or not np.isfinite(upper.scale_at_end):
            if strict:
                raise NotTransientError(
                    f"{spec.name} is not upward-transient (s(B) = +inf); the ruin function is constant")
            return RuinFunction(spec, x, x0, np.zeros_like(x), np.zeros_like(x), transient=False)
        B, hi = spec.interval.upper, x[-1]
        if np.isfinite(B):
            tail_hi, _ = integrate.quad(lambda z: float(spec.scale_derivative(np.array(z))), hi, B, limit=200)
        else:
            s_hi = float(spec.scale(np.array(hi)))
            gap = upper.scale_at_end - s_hi
            if spec.family == "brownian" and spec.mu > 0:
                gap = math.exp(-2 * spec.mu * hi) / (2 * spec.mu)
            elif gap < 1e-6 * max(1.0, abs(upper.scale_at_end)):
                from .spec import improper_integral
                gap, _, _ = improper_integral(lambda z: float(spec.scale_derivative(np.array(z))), hi, B)
            tail_hi = gap
        T = _ScaleTail(spec, tail_hi)
        t0 = float(T(np.array(x0)))
        rf = RuinFunction(spec, x, x0, np.log(T(x) / t0), -spec.scale_derivative(x) / T(x),
                          transient=True, _tail=lambda z, _T=T, _t0=t0: _T(z) / _t0, tail_scale=t0)
        return rf
    w, p = _riccati(spec, np.array([0.0]), UPPER)
    w, p = w[0], p[0]
    p = p - _hermite(x, p, w, x0)
    if np.any(w >= 0):
        raise EigenError("decreasing solution of G r = 0 not found on the grid")
    return RuinFunction(spec, x, x0, p, w, transient=True)


def escape_rate(rf: RuinFunction, y) -> np.ndarray:
    """``-r^+(y)/r(y)``: n-mass (per unit scale) of excursions from ``y`` that never return."""
    if not rf.transient:
        return np.zeros_like(np.asarray(y, dtype=float))
    y = np.asarray(y, dtype=float)
    return np.maximum(-rf.w_at(y) / rf.spec.scale_derivative(y), 0.0)


@dataclass(frozen=True)
class StandingAssumptions:
    lower_ok: bool
    upper_ok: bool
    transient: bool
    lower_kind: str
    upper_kind: str

    @property
    def all_hold(self) -> bool:
        return self.lower_ok and self.upper_ok and self.transient


def standing_assumptions(spec: DiffusionSpec) -> StandingAssumptions:
    """Boundary hypotheses for the minimum decomposition plus upward transience."""
    lo, up = spec.boundary(LOWER), spec.boundary(UPPER)
    transient = (not spec.kill_free) or (np.isfinite(up.scale_at_end) and not spec.interval.upper_in_E)
    return StandingAssumptions(lo.assumptions_hold, up.assumptions_hold, bool(transient), lo.kind, up.kind)
