"""Goodness-of-fit tests and streaming moment accumulators.

All p-values are asymptotic: the Kolmogorov distribution for the KS tests and
the chi-square tail for Pearson's statistic.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special
from scipy.stats import chi2 as _chi2


@dataclass(frozen=True)
class EmpiricalLaw:
    """A (possibly weighted) sample set."""

    samples: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        object.__setattr__(self, "samples", s)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != s.shape:
                raise ValueError("weights and samples differ in length")
            if np.any(w < 0) or not np.isfinite(w.sum()) or w.sum() <= 0:
                raise ValueError("weights must be nonnegative with a positive finite total")
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def effective_n(self) -> float:
        if self.weights is None:
            return float(self.n)
        w = self.weights
        return float(w.sum() ** 2 / np.sum(w * w))

    def ecdf(self):
        """Sorted support points and right-continuous ECDF values there."""
        order = np.argsort(self.samples, kind="mergesort")
        x = self.samples[order]
        w = np.ones_like(x) if self.weights is None else self.weights[order]
        return x, np.cumsum(w) / w.sum()


def _as_law(a) -> EmpiricalLaw:
    return a if isinstance(a, EmpiricalLaw) else EmpiricalLaw(np.asarray(a, dtype=float))


@dataclass(frozen=True)
class GofReport:
    statistic: float
    p_value: float
    n: int
    test: str

    def __post_init__(self):
        p = min(max(float(self.p_value), 0.0), 1.0)
        object.__setattr__(self, "p_value", p)
        object.__setattr__(self, "statistic", float(self.statistic))

    def passed(self, level: float = 0.01) -> bool:
        return self.p_value > level

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ks_test(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> GofReport:
    """One-sample Kolmogorov-Smirnov test against a continuous reference cdf."""
    law = _as_law(samples)
    if law.n < 30:
        raise ValueError("ks_test needs at least 30 samples")
    x, F_emp = law.ecdf()
    F = np.asarray(cdf(x), dtype=float)
    if np.any(np.diff(F) < -1e-12) or np.any(F < -1e-12) or np.any(F > 1 + 1e-12):
        raise ValueError("reference cdf is not monotone on the sample range")
    F_before = np.concatenate([[0.0], F_emp[:-1]])
    d = max(np.max(F_emp - F), np.max(F - F_before))
    n = law.effective_n
    return GofReport(d, float(special.kolmogorov(np.sqrt(n) * d)), law.n, "ks")


def ks2_test(a, b) -> GofReport:
    """Two-sample Kolmogorov-Smirnov test."""
    la, lb = _as_law(a), _as_law(b)
    xa, Fa = la.ecdf()
    xb, Fb = lb.ecdf()
    grid = np.union1d(xa, xb)
    ca = np.concatenate([[0.0], Fa])[np.searchsorted(xa, grid, side="right")]
    cb = np.concatenate([[0.0], Fb])[np.searchsorted(xb, grid, side="right")]
    d = float(np.max(np.abs(ca - cb))) if grid.size else 0.0
    na, nb = la.effective_n, lb.effective_n
    en = na * nb / (na + nb)
    return GofReport(d, float(special.kolmogorov(np.sqrt(en) * d)), la.n + lb.n, "ks2")


def merge_small_bins(counts, expected, min_expected: float = 5.0):
    """Merge adjacent bins (in the given order) until every expected count >= min_expected."""
    counts = np.asarray(counts, dtype=float).ravel()
    expected = np.asarray(expected, dtype=float).ravel()
    out_c, out_e = [], []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= min_expected:
            out_c.append(acc_c)
            out_e.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0 or acc_c > 0:
        if out_e:
            out_c[-1] += acc_c
            out_e[-1] += acc_e
        else:
            out_c.append(acc_c)
            out_e.append(acc_e)
    return np.array(out_c), np.array(out_e)


def chi2_test(counts, expected, min_expected: float = 5.0) -> GofReport:
    """Pearson chi-square test with (bins - 1) degrees of freedom.

    Bins whose expected count falls below ``min_expected`` are merged with
    their neighbours first.
    """
    counts = np.asarray(counts, dtype=float).ravel()
    expected = np.asarray(expected, dtype=float).ravel()
    if counts.shape != expected.shape:
        raise ValueError("counts and expected differ in shape")
    if not np.any(expected > 0):
        raise ValueError("expected histogram is identically zero")
    c, e = merge_small_bins(counts, expected, min_expected)
    stat = float(np.sum((c - e) ** 2 / e))
    dof = max(c.size - 1, 1)
    return GofReport(stat, float(_chi2.sf(stat, dof)), int(counts.sum()), "chi2")


@dataclass
class Welford:
    """Streaming mean/variance; ``merge`` is associative (Chan et al.)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, values) -> "Welford":
        v = np.asarray(values, dtype=float).ravel()
        if v.size:
            other = Welford(v.size, float(v.mean()), float(np.sum((v - v.mean()) ** 2)))
            self.merge(other)
        return self

    def merge(self, other: "Welford") -> "Welford":
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        self.m2 += other.m2 + delta * delta * self.count * other.count / n
        self.mean += delta * other.count / n
        self.count = n
        return self

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else float("nan")

    @property
    def se(self) -> float:
        return float(np.sqrt(self.variance / self.count)) if self.count > 1 else float("nan")


def z_score(a: float, se_a: float, b: float, se_b: float) -> float:
    comb = np.hypot(se_a, se_b)
    if comb == 0:
        return 0.0 if a == b else float("inf")
    return float((a - b) / comb)


def binned_counts(columns: Sequence[np.ndarray], edges: Sequence[np.ndarray]) -> np.ndarray:
    return np.histogramdd(np.column_stack(columns), bins=list(edges))[0]
