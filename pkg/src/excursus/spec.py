"""Diffusion specifications: SDE form, scale/speed form, presets, boundary tests.

A regular diffusion on an interval is described either by its SDE coefficients
(drift ``b``, volatility ``sigma``, kill rate ``c``) or by a scale function
``s`` with derivative ``s'`` and a speed density ``m'``.  The two forms are
linked by

    s'(x) = exp(-int 2 b / sigma^2),    m'(x) = 2 / (sigma^2(x) s'(x)),

so that the generator is ``(1/m') d/dx (u'/s') - c u``.  Standard Brownian
motion therefore has ``s(x) = x`` and ``m(dx) = 2 dx``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

Fn = Callable[[np.ndarray], np.ndarray]

LOWER, UPPER = "lower", "upper"
BOUNDARY_KINDS = ("natural", "exit", "entrance", "regular-absorbing")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class SpecError(ValueError):
    """Invalid or inconsistent diffusion specification."""


class BoundaryClassificationError(RuntimeError):
    """Feller integrals could not be decided; carries the partial integrals."""

    def __init__(self, message, partials):
        super().__init__(message)
        self.partials = partials


@dataclass(frozen=True)
class Interval:
    lower: float = -math.inf
    upper: float = math.inf
    lower_in_E: bool = False
    upper_in_E: bool = False

    def __post_init__(self):
        if not self.lower < self.upper:
            raise SpecError(f"empty interval ]{self.lower}, {self.upper}[")
        if self.lower_in_E:
            raise SpecError("the lower endpoint may not belong to the state space")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lower) & (x < self.upper)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


class CumulativeIntegral:
    """``F(x) = int_{x_ref}^x fn`` tabulated on a grid, evaluated anywhere.

    Grid cells are integrated with 8-point Gauss-Legendre; off-grid points add
    a partial Gauss-Legendre piece from the nearest node below.
    """

    def __init__(self, fn: Fn, grid: np.ndarray, x_ref: float):
        self.fn = fn
        self.grid = np.asarray(grid, dtype=float)
        cells = self._gl(self.grid[:-1], self.grid[1:])
        cum = np.concatenate([[0.0], np.cumsum(cells)])
        self._cum = cum
        self._offset = 0.0
        self._offset = float(self(np.array([x_ref]))[0])

    def _gl(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[..., None] + half[..., None] * _GL_NODES
        return half * np.sum(_GL_WEIGHTS * self.fn(nodes), axis=-1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty_like(flat)
        g = self.grid
        inside = (flat >= g[0]) & (flat <= g[-1])
        if np.any(inside):
            xi = flat[inside]
            idx = np.clip(np.searchsorted(g, xi, side="right") - 1, 0, g.size - 2)
            out[inside] = self._cum[idx] + self._gl(g[idx], xi)
        for i in np.flatnonzero(~inside):
            xv = flat[i]
            if not np.isfinite(xv):
                out[i] = math.copysign(math.inf, xv)
                continue
            edge, base = (g[0], self._cum[0]) if xv < g[0] else (g[-1], self._cum[-1])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, _ = integrate.quad(lambda z: float(self.fn(np.array(z))), edge, xv, limit=200)
            out[i] = base + val
        return (out - self._offset).reshape(x.shape)


def _dlog(fn: Fn, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Five-point central derivative of ``log fn``."""
    lf = lambda z: np.log(fn(z))
    return (-lf(x + 2 * h) + 8 * lf(x + h) - 8 * lf(x - h) + lf(x - 2 * h)) / (12 * h)


@dataclass(frozen=True, eq=False)
class DiffusionSpec:
    """A one-dimensional regular diffusion in both SDE and scale/speed form.

    Callables are vectorised over numpy arrays.  ``window`` is the working
    window used for tabulation and quadrature; ``grid_n`` points uniform in x.
    """

    interval: Interval
    drift: Fn
    sigma: Fn
    kill_rate: Fn
    scale: Optional[Fn]
    scale_derivative: Optional[Fn]
    speed_density: Optional[Fn]
    window: Tuple[float, float]
    grid_n: int = 2001
    name: str = "custom"
    family: Optional[str] = None
    params: Mapping[str, float] = field(default_factory=dict)
    absorbing: frozenset = frozenset()
    kill_free: bool = True
    scale_inverse: Optional[Fn] = None
    anchor: float = 0.0
    _cache: Dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def grid(self) -> np.ndarray:
        if "grid" not in self._cache:
            self._cache["grid"] = np.linspace(self.window[0], self.window[1], self.grid_n)
        return self._cache["grid"]

    @property
    def h(self) -> float:
        return (self.window[1] - self.window[0]) / (self.grid_n - 1)

    @property
    def is_brownian(self) -> bool:
        """Closed forms (Gaussian kernels, image formulas) apply."""
        return self.family == "brownian"

    @property
    def mu(self) -> float:
        return float(self.params.get("mu", 0.0))

    @property
    def beta(self) -> float:
        return float(self.params.get("beta", 0.0))

    @property
    def sde_only(self) -> bool:
        return self.scale is None

    def sigma2(self, x):
        s = self.sigma(np.asarray(x, dtype=float))
        return s * s

    def scale_inv(self, v) -> np.ndarray:
        """Inverse of the scale function."""
        v = np.asarray(v, dtype=float)
        if self.scale_inverse is not None:
            return self.scale_inverse(v)
        g = self.grid
        sg = self.scale(g)
        out = np.interp(v, sg, g)
        outside = (v < sg[0]) | (v > sg[-1])
        flat_v, flat_o = v.ravel(), out.ravel()
        for i in np.flatnonzero(outside.ravel()):
            flat_o[i] = self._invert_outside(flat_v[i], g, sg)
        return flat_o.reshape(v.shape)

    def _invert_outside(self, target, g, sg):
        lo_end, hi_end = self.interval.lower, self.interval.upper
        if target < sg[0]:
            a, step = g[0], g[-1] - g[0]
            b = a
            while True:
                b = a - step
                if np.isfinite(lo_end) and b <= lo_end:
                    b = lo_end + (a - lo_end) * 1e-12
                if self.scale(np.array(b)) <= target or step > 1e8:
                    break
                a, step = b, step * 2
            return optimize.brentq(lambda z: float(self.scale(np.array(z))) - target, b, a)
        a, step = g[-1], g[-1] - g[0]
        while True:
            b = a + step
            if np.isfinite(hi_end) and b >= hi_end:
                b = hi_end - (hi_end - a) * 1e-12
            if self.scale(np.array(b)) >= target or step > 1e8:
                break
            a, step = b, step * 2
        return optimize.brentq(lambda z: float(self.scale(np.array(z))) - target, a, b)

    def boundary(self, end: str) -> "BoundaryClass":
        key = ("boundary", end)
        if key not in self._cache:
            self._cache[key] = classify_boundary(self, end)
        return self._cache[key]


# ---------------------------------------------------------------------------
# construction


def _check_positive(name, values, grid):
    bad = ~(np.isfinite(values) & (values > 0))
    if np.any(bad):
        x = grid[np.argmax(bad)]
        raise SpecError(f"{name} must be finite and positive on the open interval (fails at x={x:.6g})")


def build_spec(
    *,
    drift: Optional[Fn] = None,
    sigma: Optional[Fn] = None,
    kill_rate: Optional[Fn] = None,
    scale: Optional[Fn] = None,
    scale_derivative: Optional[Fn] = None,
    speed_density: Optional[Fn] = None,
    interval: Optional[Interval] = None,
    window: Optional[Tuple[float, float]] = None,
    grid_n: int = 2001,
    name: str = "custom",
    family: Optional[str] = None,
    params: Optional[Mapping[str, float]] = None,
    absorbing=(),
    scale_inverse: Optional[Fn] = None,
    rtol: float = 1e-6,
    sde_only: bool = False,
) -> DiffusionSpec:
    """Build a validated :class:`DiffusionSpec` from either representation.

    Supply ``(drift, sigma)`` or ``(scale, speed_density)`` (optionally with
    ``scale_derivative``), or both, in which case they are checked for
    mutual consistency up to the affine freedom of the scale function.
    ``sde_only=True`` skips the scale/speed form entirely (degenerate or
    purely simulated models).
    """
    interval = interval or Interval()
    if window is None:
        lo = interval.lower if np.isfinite(interval.lower) else -8.0
        hi = interval.upper if np.isfinite(interval.upper) else 8.0
        window = (lo, hi)
    lo, hi = map(float, window)
    if not lo < hi:
        raise SpecError("window must satisfy lo < hi")
    if lo < interval.lower or hi > interval.upper:
        raise SpecError("working window must lie inside the interval")
    if grid_n < 5:
        raise SpecError("grid_n must be at least 5")
    kill_rate = kill_rate or _zero
    grid = np.linspace(lo, hi, grid_n)
    interior = grid[interval.contains(grid)]
    if interior.size < 3:
        raise SpecError("window has no interior grid points")
    c_vals = np.broadcast_to(kill_rate(interior), interior.shape)
    if np.any(~np.isfinite(c_vals)) or np.any(c_vals < 0):
        raise SpecError("kill rate must be finite and nonnegative")
    kill_free = bool(np.all(c_vals == 0))
    absorbing = frozenset(absorbing)
    if not absorbing <= {LOWER, UPPER}:
        raise SpecError("absorbing ends must be 'lower' and/or 'upper'")
    common = dict(
        interval=interval, kill_rate=kill_rate, window=(lo, hi), grid_n=int(grid_n), name=name,
        family=family, params=dict(params or {}), absorbing=absorbing, kill_free=kill_free,
    )

    if sde_only:
        if drift is None or sigma is None:
            raise SpecError("an SDE-only spec needs drift and sigma")
        return DiffusionSpec(drift=drift, sigma=sigma, scale=None, scale_derivative=None,
                             speed_density=None, **common)

    x_ref = 0.0 if lo <= 0.0 <= hi and interval.contains(0.0) else float(interior[interior.size // 2])
    have_sde = drift is not None and sigma is not None
    have_scale = scale is not None and speed_density is not None
    if not (have_sde or have_scale):
        raise SpecError("need (drift, sigma) or (scale, speed_density)")

    if have_sde:
        sig = np.broadcast_to(sigma(interior), interior.shape)
        _check_positive("sigma", sig, interior)

    if have_scale:
        if scale_derivative is None:
            def scale_derivative(x, _s=scale):
                x = np.asarray(x, dtype=float)
                h = 1e-4 * np.maximum(1.0, np.abs(x))
                return (-_s(x + 2 * h) + 8 * _s(x + h) - 8 * _s(x - h) + _s(x - 2 * h)) / (12 * h)
        sv = np.broadcast_to(scale(interior), interior.shape)
        if np.any(np.diff(sv) <= 0):
            k = int(np.argmax(np.diff(sv) <= 0))
            raise SpecError(f"scale function is not strictly increasing near x={interior[k]:.6g}")
        _check_positive("scale derivative", np.broadcast_to(scale_derivative(interior), interior.shape), interior)
        _check_positive("speed density", np.broadcast_to(speed_density(interior), interior.shape), interior)

    if have_sde and not have_scale:
        two_b_over_s2 = lambda x: 2.0 * drift(x) / sigma(x) ** 2
        log_sp = CumulativeIntegral(two_b_over_s2, interior, x_ref)
        scale_derivative = lambda x, _l=log_sp: np.exp(-_l(x))
        scale = CumulativeIntegral(scale_derivative, interior, x_ref)
        speed_density = lambda x, _sp=scale_derivative: 2.0 / (sigma(x) ** 2 * _sp(x))
    elif have_scale and not have_sde:
        sp, md = scale_derivative, speed_density

        def sigma(x, _sp=sp, _md=md):
            return np.sqrt(2.0 / (_md(x) * _sp(x)))

        def drift(x, _sp=sp, _md=md, _A=interval.lower, _B=interval.upper):
            x = np.asarray(x, dtype=float)
            h = 1e-4 * np.maximum(1.0, np.abs(x))
            room = np.minimum(np.abs(x - _A), np.abs(_B - x)) / 8.0
            h = np.minimum(h, room)
            return -0.5 * (2.0 / (_md(x) * _sp(x))) * _dlog(_sp, x, h)

        sig = np.broadcast_to(sigma(interior), interior.shape)
        _check_positive("sigma", sig, interior)
    else:
        # both forms supplied: consistency up to a positive multiple of s'
        log_sp = CumulativeIntegral(lambda x: 2.0 * drift(x) / sigma(x) ** 2, interior, x_ref)
        ratio = np.log(scale_derivative(interior)) + log_sp(interior)
        if np.max(np.abs(ratio - ratio[interior.size // 2])) > rtol * max(1.0, np.max(np.abs(ratio))):
            raise SpecError("scale derivative inconsistent with exp(-int 2b/sigma^2)")
        m_expected = 2.0 / (sigma(interior) ** 2 * scale_derivative(interior))
        rel = np.abs(speed_density(interior) / m_expected - 1.0)
        if np.max(rel) > rtol:
            raise SpecError("speed density inconsistent with 2/(sigma^2 s')")

    return DiffusionSpec(drift=drift, sigma=sigma, scale=scale, scale_derivative=scale_derivative,
                         speed_density=speed_density, scale_inverse=scale_inverse, anchor=x_ref, **common)


# ---------------------------------------------------------------------------
# presets


def brownian(mu: float = 0.0, beta: float = 0.0, *, window=(-8.0, 8.0), grid_n: int = 2001,
             name: Optional[str] = None) -> DiffusionSpec:
    """Brownian motion with drift ``mu`` killed at constant rate ``beta``.

    Normalisation: ``s'(x) = exp(-2 mu x)``, ``s(0) = 0``, ``m'(x) = 2 exp(2 mu x)``.
    """
    mu, beta = float(mu), float(beta)
    if abs(mu) < 1e-100:  # expm1(-2 mu x) / 2mu underflows to garbage; the drift is nil anyway
        mu = 0.0
    if mu == 0.0:
        s = lambda x: np.asarray(x, dtype=float) * 1.0
        s_inv = lambda v: np.asarray(v, dtype=float) * 1.0
    else:
        s = lambda x: -np.expm1(-2 * mu * np.asarray(x, dtype=float)) / (2 * mu)
        s_inv = lambda v: -np.log1p(-2 * mu * np.asarray(v, dtype=float)) / (2 * mu)
    if name is None:
        name = "brownian" if mu == 0 and beta == 0 else ("killed-bm" if beta else "bm-drift")
    return build_spec(
        drift=lambda x: np.full_like(np.asarray(x, dtype=float), mu),
        sigma=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        kill_rate=(lambda x: np.full_like(np.asarray(x, dtype=float), beta)) if beta else None,
        scale=s,
        scale_derivative=lambda x: np.exp(-2 * mu * np.asarray(x, dtype=float)),
        speed_density=lambda x: 2 * np.exp(2 * mu * np.asarray(x, dtype=float)),
        scale_inverse=s_inv,
        window=window, grid_n=grid_n, name=name, family="brownian",
        params={"mu": mu, "beta": beta},
    )


def bessel3(*, window=(0.01, 20.0), grid_n: int = 2001) -> DiffusionSpec:
    """Three-dimensional Bessel process: ``s(x) = -1/x``, ``m'(x) = 2x^2``."""
    f = lambda x: np.asarray(x, dtype=float)
    return build_spec(
        drift=lambda x: 1.0 / f(x),
        sigma=lambda x: np.ones_like(f(x)),
        scale=lambda x: -1.0 / f(x),
        scale_derivative=lambda x: 1.0 / f(x) ** 2,
        speed_density=lambda x: 2.0 * f(x) ** 2,
        scale_inverse=lambda v: -1.0 / f(v),
        interval=Interval(0.0, math.inf), window=window, grid_n=grid_n, name="bessel3",
    )


def absorbed_brownian(*, window=(0.005, 10.0), grid_n: int = 2001) -> DiffusionSpec:
    """Standard Brownian motion on ]0, inf[ absorbed (killed) at 0."""
    f = lambda x: np.asarray(x, dtype=float)
    return build_spec(
        drift=lambda x: np.zeros_like(f(x)),
        sigma=lambda x: np.ones_like(f(x)),
        scale=lambda x: f(x) * 1.0,
        scale_derivative=lambda x: np.ones_like(f(x)),
        speed_density=lambda x: np.full_like(f(x), 2.0),
        scale_inverse=lambda v: f(v) * 1.0,
        interval=Interval(0.0, math.inf), window=window, grid_n=grid_n, name="bm-absorbed",
        absorbing={LOWER}, family="brownian-absorbed", params={"mu": 0.0, "beta": 0.0},
    )


PRESETS = ("brownian", "bm-drift", "killed-bm", "bessel3", "bm-absorbed", "custom")

_EXPR_NAMESPACE = {
    "np": np, "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sin": np.sin, "cos": np.cos,
    "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh, "abs": np.abs, "pi": math.pi,
}


def compile_expr(expr: str) -> Fn:
    """Compile an arithmetic expression in ``x`` into a vectorised callable."""
    code = compile(expr, "<expr>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name != "x":
            raise SpecError(f"unknown name {name!r} in expression {expr!r}")

    def fn(x):
        x = np.asarray(x, dtype=float)
        val = eval(code, {"__builtins__": {}}, {**_EXPR_NAMESPACE, "x": x})
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape).copy()

    fn.expr = expr
    return fn


def spec_from_mapping(cfg: Mapping[str, str]) -> DiffusionSpec:
    """Build a spec from flat key-value settings (spec files, CLI selectors)."""
    cfg = {k.strip().lower(): str(v).strip() for k, v in cfg.items()}
    kind = cfg.get("kind", "brownian")
    if kind not in PRESETS:
        raise SpecError(f"unknown spec kind {kind!r}; valid presets: {', '.join(PRESETS)}")
    known = {"kind", "mu", "beta", "window_lo", "window_hi", "grid_n", "kill_rate_expr",
             "drift_expr", "sigma_expr"}
    extra = set(cfg) - known
    if extra:
        raise SpecError(f"unknown spec keys: {', '.join(sorted(extra))}")
    grid_n = int(cfg.get("grid_n", 2001))
    defaults = {"bessel3": (0.01, 20.0), "bm-absorbed": (0.005, 10.0)}.get(kind, (-8.0, 8.0))
    window = (float(cfg.get("window_lo", defaults[0])), float(cfg.get("window_hi", defaults[1])))
    mu = float(cfg.get("mu", 0.0))
    beta = float(cfg.get("beta", 0.0))
    kill = cfg.get("kill_rate_expr")
    kill_fn = None
    if kill:
        kill_fn = compile_expr(kill)
        vals = kill_fn(np.linspace(*window, 17))
        if np.all(vals == vals[0]):
            beta, kill_fn = float(vals[0]), None
    if kind == "custom":
        if "drift_expr" not in cfg or "sigma_expr" not in cfg:
            raise SpecError("kind=custom needs drift_expr and sigma_expr")
        kr = kill_fn or ((lambda x, _b=beta: np.full_like(np.asarray(x, float), _b)) if beta else None)
        return build_spec(drift=compile_expr(cfg["drift_expr"]), sigma=compile_expr(cfg["sigma_expr"]),
                          kill_rate=kr, window=window, grid_n=grid_n, name="custom")
    if kind == "bessel3":
        return bessel3(window=window, grid_n=grid_n)
    if kind == "bm-absorbed":
        return absorbed_brownian(window=window, grid_n=grid_n)
    if kind == "brownian" and (mu or beta):
        kind = "killed-bm" if beta else "bm-drift"
    spec = brownian(mu, beta, window=window, grid_n=grid_n, name=kind)
    if kill_fn is not None:
        base = spec
        spec = build_spec(drift=base.drift, sigma=base.sigma, kill_rate=kill_fn, scale=base.scale,
                          scale_derivative=base.scale_derivative, speed_density=base.speed_density,
                          scale_inverse=base.scale_inverse, window=window, grid_n=grid_n, name=kind)
    return spec


def parse_selector(text: str) -> Dict[str, str]:
    """``"bm-drift:mu=0.5,window_lo=-10"`` -> settings mapping."""
    kind, _, rest = text.partition(":")
    cfg = {"kind": kind.strip()}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise SpecError(f"malformed spec parameter {item!r}")
        cfg[key.strip()] = val.strip()
    return cfg


def read_spec_file(path) -> Dict[str, str]:
    cfg = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, val = line.split(sep, 1)
                cfg[key.strip()] = val.strip()
                break
        else:
            raise SpecError(f"malformed spec line {raw!r}")
    return cfg


def write_spec_file(path, cfg: Mapping[str, object]) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in cfg.items()))


def resolve_spec(text: str) -> DiffusionSpec:
    """Spec selector from the CLI: a spec-file path or a preset selector."""
    p = Path(text)
    if p.is_file():
        return spec_from_mapping(read_spec_file(p))
    return spec_from_mapping(parse_selector(text))


# ---------------------------------------------------------------------------
# boundary classification


@dataclass(frozen=True)
class BoundaryClass:
    kind: str
    end: str
    scale_at_end: float
    sigma_integral: float
    n_integral: float
    assumptions_hold: bool
    partials: Mapping[str, Tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")


def improper_integral(fn: Callable[[float], float], a: float, end: float, max_segments: int = 48):
    """Integrate a nonnegative ``fn`` from ``a`` towards ``end`` over shrinking/doubling segments.

    Returns ``(value, status, partials)`` with status ``converged``,
    ``divergent`` or ``undetermined``.
    """
    direction = 1.0 if end > a else -1.0
    total, prev = 0.0, a
    partials, incs = [], []
    length = abs(end - a) if np.isfinite(end) else max(1.0, abs(a))
    for k in range(1, max_segments + 1):
        if np.isfinite(end):
            cut = end - direction * length * 2.0 ** (-k)
        else:
            cut = a + direction * length * (2.0 ** k - 1.0)
        if cut == prev:
            break
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore")
            try:
                inc, _ = integrate.quad(lambda z: float(fn(z)), min(prev, cut), max(prev, cut), limit=200)
            except (OverflowError, ValueError):
                inc = math.inf
        if not np.isfinite(inc):
            partials.append(math.inf)
            return math.inf, "divergent", tuple(partials)
        total += abs(inc)
        partials.append(total)
        incs.append(abs(inc))
        if total > 1e15:
            return math.inf, "divergent", tuple(partials)
        if k >= 4 and incs[-1] <= 1e-10 * max(1.0, total) and incs[-2] <= 1e-8 * max(1.0, total):
            return total, "converged", tuple(partials)
        prev = cut
    if len(incs) >= 4 and all(incs[i] >= 0.7 * incs[i - 1] for i in range(len(incs) - 3, len(incs))):
        return math.inf, "divergent", tuple(partials)
    if incs and incs[-1] <= 1e-6 * max(1.0, total):
        return total, "converged", tuple(partials)
    return total, "undetermined", tuple(partials)


def classify_boundary(spec: DiffusionSpec, end: str) -> BoundaryClass:
    """Feller classification of an endpoint by quadrature of the test integrals."""
    if spec.sde_only:
        raise SpecError("boundary classification needs the scale/speed form")
    if end not in (LOWER, UPPER):
        raise ValueError("end must be 'lower' or 'upper'")
    c = spec.anchor
    e = spec.interval.lower if end == LOWER else spec.interval.upper
    s, sp, m = spec.scale, spec.scale_derivative, spec.speed_density
    f1 = lambda fn: (lambda z: fn(np.array(z, dtype=float)))
    s_c = float(s(np.array(c)))
    ds, st_s, p_s = improper_integral(f1(sp), c, e)
    if st_s == "undetermined":
        raise BoundaryClassificationError(f"scale integral at {end} end undecided", {"scale": p_s})
    finite_s = st_s == "converged"
    s_end = (s_c - ds if end == LOWER else s_c + ds) if finite_s else (-math.inf if end == LOWER else math.inf)
    if finite_s:
        # Fubini form int s'(z) M(c, z) dz avoids cancellation in s(x) - s(end)
        def sig_fn(z):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                mass, _ = integrate.quad(lambda w: float(m(np.array(w))), min(c, z), max(c, z), limit=200)
            return float(sp(np.array(z))) * mass
        sig, st_sig, p_sig = improper_integral(sig_fn, c, e)
    else:
        sig, st_sig, p_sig = math.inf, "divergent", ()
    n_fn = lambda z: abs(s_c - float(s(np.array(z)))) * float(m(np.array(z)))
    nn, st_n, p_n = improper_integral(n_fn, c, e)
    partials = {"scale": p_s, "sigma": p_sig, "n": p_n}
    if "undetermined" in (st_sig, st_n):
        raise BoundaryClassificationError(f"Feller integrals at {end} end undecided", partials)
    sig_fin, n_fin = st_sig == "converged", st_n == "converged"
    if sig_fin and n_fin:
        kind = "regular-absorbing"
    elif sig_fin:
        kind = "exit"
    elif n_fin:
        kind = "entrance"
    else:
        kind = "natural"
    holds = True if end == LOWER else not spec.interval.upper_in_E
    return BoundaryClass(kind, end, s_end, sig, nn, holds, partials)
