import math

import numpy as np
import pytest
from scipy import integrate

from excursus import vervaat as vv


def test_loop_path_validation():
    with pytest.raises(ValueError):
        vv.LoopPath(np.array([0.0, 1.0, 0.5]))
    with pytest.raises(ValueError):
        vv.LoopPath(np.array([0.0, 0.0]))
    p = vv.LoopPath(np.array([0.0, 1.0, 0.0]))
    assert p.n == 2 and p.at(0.5) == 1.0


def test_forward_v_shape():
    out = vv.vervaat_forward(vv.LoopPath(np.array([0.0, -1.0, 0.0])))
    np.testing.assert_array_equal(out.values, [0.0, 1.0, 0.0])


def test_forward_wraps_around():
    out = vv.vervaat_forward(vv.LoopPath(np.array([0.0, 0.5, -1.0, -0.5, 0.0])))
    np.testing.assert_allclose(out.values, [0.0, 0.5, 1.0, 1.5, 0.0])


def test_inverse_then_forward_is_identity(rng):
    e = vv.sample_excursion01(100, rng, 50)
    for u in (0.01, 0.3, 0.99):
        back = vv.vervaat_forward(vv.vervaat_inverse(e, u))
        assert np.max(np.abs(back - e)) <= 1e-12


def test_inverse_rounds_to_interior():
    e = vv.LoopPath(np.array([0.0, 1.0, 2.0, 1.0, 0.0]))
    np.testing.assert_array_equal(vv.vervaat_inverse(e, 0.0).values, [0.0, 1.0, 0.0, -1.0, 0.0])
    np.testing.assert_array_equal(vv.vervaat_inverse(e, 1.0).values, vv.vervaat_inverse(e, 0.75).values)


def test_samplers_pinned(rng):
    b = vv.sample_bridge01(50, rng, 10)
    e = vv.sample_excursion01(50, rng, 10)
    assert np.all(b[:, [0, -1]] == 0.0) and np.all(e[:, [0, -1]] == 0.0)
    assert np.all(e[:, 1:-1] > 0.0)
    with pytest.raises(ValueError):
        vv.sample_bridge01(1, rng)


def test_refined_forward_is_excursion(rng):
    out = vv.vervaat_forward_refined(vv.sample_bridge01(200, rng, 100), rng)
    assert out.shape == (100, 201)
    assert np.all(out >= 0.0) and np.all(out[:, [0, -1]] == 0.0)


def test_no_ties_in_continuous_paths(rng):
    assert vv.tied_argmin_fraction(vv.sample_bridge01(500, rng, 200)) == 0.0
    assert vv.tied_argmin_fraction(np.array([[0.0, -1.0, -1.0, 0.0]])) == 1.0


def test_marginal_density_normalised():
    for t in (0.1, 0.5, 0.8):
        val, _ = integrate.quad(lambda x: float(vv.excursion_marginal_density(t, x)), 0, 10)
        assert val == pytest.approx(1.0, rel=1e-8)
    assert float(vv.excursion_marginal_cdf(0.5, 0.5)) == pytest.approx(
        integrate.quad(lambda x: float(vv.excursion_marginal_density(0.5, x)), 0, 0.5)[0], rel=1e-8)


def test_transition_consistent_with_marginal():
    t, v, y = 0.25, 0.25, 0.6
    val, _ = integrate.quad(lambda x: float(vv.excursion_marginal_density(t, x)
                                            * vv.excursion_transition_density(t, v, x, y)), 0, 8, limit=200)
    assert val == pytest.approx(float(vv.excursion_marginal_density(t + v, y)), rel=1e-6)


def test_conditional_mean_monte_carlo(rng):
    e = vv.sample_excursion01(400, rng, 20000)
    sel = np.abs(e[:, 100] - 0.5) < 0.02
    est = e[sel, 200].mean()
    se = e[sel, 200].std() / math.sqrt(sel.sum())
    assert abs(est - vv.excursion_conditional_mean(0.25, 0.25, 0.5)) < 4 * se + 0.01


def test_forward_law_small():
    assert vv.verify_forward(500, 2000, seed=1).passed()


def test_round_trip_report():
    rep = vv.verify_round_trip(200, 2000, seed=1)
    assert rep["exact"] and rep["passed"]


def test_bridge_covariance():
    rep = vv.verify_bridge_covariance(200, 4000, seed=1)
    assert abs(rep["var_z"]) < 4 and abs(rep["cov_z"]) < 4
