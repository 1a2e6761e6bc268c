import math
import warnings

import numpy as np
import pytest

from excursus import eigen
from excursus.eigen import (NotTransientError, TruncationWarning, escape_rate, excursion_resolvent,
                            hitting_laplace, resolvent_apply, resolvent_density, ruin_function,
                            solve_eigenfunctions, standing_assumptions)
from excursus.spec import brownian


def test_standard_bm_eigenfunctions(bm):
    alpha = 1.0
    pair = solve_eigenfunctions(bm, alpha, x0=0.0)
    x = np.linspace(-3, 3, 13)
    k = math.sqrt(2 * alpha)
    np.testing.assert_allclose(np.exp(pair.log_g1(x)), np.exp(k * x), rtol=1e-7)
    np.testing.assert_allclose(np.exp(pair.log_g2(x)), np.exp(-k * x), rtol=1e-7)
    assert pair.W == pytest.approx(2 * math.sqrt(2 * alpha), rel=1e-8)


@pytest.mark.parametrize("name", ["bm", "bm_drift", "bes3", "bm_abs"])
def test_wronskian_constant(name, request):
    spec = request.getfixturevalue(name)
    pair = solve_eigenfunctions(spec, 1.0)
    assert pair.wronskian_deviation <= 1e-6
    assert np.all(np.diff(pair.g1) > 0) and np.all(np.diff(pair.g2) < 0)
    assert np.all(pair.g1 > 0) and np.all(pair.g2 > 0)


def test_drift_decreasing_eigenfunction(bm_drift):
    pair = solve_eigenfunctions(bm_drift, 1.0)
    ratio = math.exp(float(pair.log_g2(1.0) - pair.log_g2(0.0)))
    assert ratio == pytest.approx(math.exp(-2.0), rel=1e-6)


def test_resolvent_closed_form(bm):
    pair = solve_eigenfunctions(bm, 1.0)
    g = np.linspace(-2, 2, 9)
    X, Y = np.meshgrid(g, g)
    exact = np.exp(-math.sqrt(2) * np.abs(X - Y)) / (2 * math.sqrt(2))
    np.testing.assert_allclose(resolvent_density(pair, X, Y), exact, rtol=1e-4)


def test_resolvent_unimodal_in_y(bm_drift):
    pair = solve_eigenfunctions(bm_drift, 0.7)
    y = np.linspace(-2, 2, 41)
    u = resolvent_density(pair, 0.0, y)
    assert np.all(np.diff(u[y <= 0]) > 0) and np.all(np.diff(u[y >= 0]) < 0)


def test_resolvent_of_constant(bm):
    pair = solve_eigenfunctions(bm, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        U = resolvent_apply(pair, lambda z: np.ones_like(z))
    np.testing.assert_allclose(U(np.linspace(-2, 2, 5)), 1.0, atol=1e-3)


def test_resolvent_with_constant_killing():
    alpha, beta = 1.0, 0.5
    pair = solve_eigenfunctions(brownian(0.0, beta), alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        U = resolvent_apply(pair, lambda z: np.ones_like(z))
    np.testing.assert_allclose(U(np.linspace(-2, 2, 5)), 1 / (alpha + beta), rtol=1e-3)


def test_truncation_is_flagged(bm):
    pair = solve_eigenfunctions(bm, 0.05)
    with pytest.warns(TruncationWarning):
        resolvent_apply(pair, lambda z: np.ones_like(z))


def test_resolvent_positive(bm_drift):
    pair = solve_eigenfunctions(bm_drift, 1.0)
    U = resolvent_apply(pair, lambda z: np.exp(-z * z))
    assert np.all(U.values >= 0)


def test_hitting_values(bm, bm_drift):
    pair = solve_eigenfunctions(bm, 1.0)
    assert hitting_laplace(pair, 1.0, 0.0) == pytest.approx(math.exp(-math.sqrt(2)), rel=1e-6)
    assert hitting_laplace(pair, 0.3, 0.3) == 1.0
    pd = solve_eigenfunctions(bm_drift, 1.0)
    assert hitting_laplace(pd, 1.0, 0.0) == pytest.approx(math.exp(-(0.5 + math.sqrt(2.25))), rel=1e-4)


def test_hitting_product_rule(bm_drift):
    pair = solve_eigenfunctions(bm_drift, 0.8)
    for x, y, z in ((-1.0, 0.2, 1.5), (0.0, 0.5, 2.0)):
        assert hitting_laplace(pair, x, z) == pytest.approx(hitting_laplace(pair, x, y) * hitting_laplace(pair, y, z),
                                                             rel=1e-8)
        assert hitting_laplace(pair, z, x) == pytest.approx(hitting_laplace(pair, z, y) * hitting_laplace(pair, y, x),
                                                             rel=1e-8)


def test_excursion_resolvent_half_line(bm):
    pair = solve_eigenfunctions(bm, 1.0, x0=0.0)
    val = excursion_resolvent(pair, 0.0, lambda z: (z > 0).astype(float))
    assert val == pytest.approx(math.sqrt(2), rel=1e-4)


def test_ruin_function_drift(bm_drift):
    rf = ruin_function(bm_drift, x0=0.0)
    x = np.linspace(-2, 3, 11)
    np.testing.assert_allclose(rf.r(x), np.exp(-x), rtol=1e-8)
    assert float(rf.r(0.0)) == pytest.approx(1.0)
    assert float(escape_rate(rf, 0.0)) == pytest.approx(1.0, rel=1e-6)
    assert float(escape_rate(rf, 1.0)) == pytest.approx(math.e, rel=1e-6)
    assert rf.generator_residual() < 1e-3


def test_ruin_function_killed():
    mu, beta = 0.3, 0.2
    spec = brownian(mu, beta)
    rf = ruin_function(spec, x0=0.0)
    k = mu + math.sqrt(mu * mu + 2 * beta)
    x = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(rf.r(x), np.exp(-k * x), rtol=1e-5)


def test_ruin_function_bessel(bes3):
    rf = ruin_function(bes3, x0=1.0)
    x = np.array([0.5, 1.0, 2.0, 5.0])
    np.testing.assert_allclose(rf.r(x), 1.0 / x, rtol=1e-7)
    assert float(escape_rate(rf, 2.0)) == pytest.approx(2.0, rel=1e-6)


def test_recurrent_spec_has_no_ruin_function(bm):
    with pytest.raises(NotTransientError):
        ruin_function(bm)
    rf = ruin_function(bm, strict=False)
    assert not rf.transient
    assert float(escape_rate(rf, 0.0)) == 0.0


def test_standing_assumptions(bm_drift, bm):
    assert standing_assumptions(bm_drift).all_hold
    assert not standing_assumptions(bm).transient
