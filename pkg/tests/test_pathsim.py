import math

import numpy as np
import pytest
from scipy import stats as sps

from excursus import pathsim as ps
from excursus.spec import brownian, build_spec
from excursus.stats import ks_test


def test_path_length_validated():
    with pytest.raises(ValueError):
        ps.Path(0.0, 0.1, np.zeros(3), 1.0)
    p = ps.Path(0.0, 0.1, np.zeros(11), 1.0)
    np.testing.assert_allclose(p.times[[0, -1]], [0.0, 1.0])


def test_off_grid_lifetime():
    p = ps.Path(0.0, 0.1, np.zeros(4), 0.25)
    assert p.times[-1] == 0.25


def test_zero_variance_follows_drift(rng):
    spec = build_spec(drift=lambda x: -np.ones_like(x), sigma=lambda x: np.zeros_like(x), sde_only=True)
    b = ps.simulate_paths(spec, 0.0, 0.01, 1.0, 3, rng)
    np.testing.assert_allclose(b.values[0], -np.arange(101) * 0.01, atol=1e-8)


def test_brownian_terminal_law(rng):
    b = ps.simulate_paths(brownian(0.3), 0.0, 0.01, 2.0, 4000, rng)
    x = b.final_values()
    assert ks_test(x, lambda v: sps.norm.cdf(v, loc=0.6, scale=math.sqrt(2.0))).passed()


def test_killing_survival(rng):
    beta = 0.7
    b = ps.simulate_paths(brownian(0.0, beta), 0.0, 0.01, 1.0, 20000, rng)
    surv = 1.0 - b.killed.mean()
    assert abs(surv - math.exp(-beta)) < 4 * math.sqrt(surv * (1 - surv) / 20000)


def test_bridge_minimum_law(rng):
    a, b, var = 0.3, 0.5, 0.2
    m = ps.bridge_minimum(a, b, var, rng.random(20000))
    assert np.all(m <= min(a, b))
    # P(min <= l) = exp(-2 (a - l)(b - l) / var) for l < min(a, b)
    cdf = lambda l: np.where(l < a, np.exp(-2 * (a - l) * (b - l) / var), 1.0)
    assert ks_test(m, cdf).passed()


def test_bridge_maximum_mirrors_minimum():
    u = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(ps.bridge_maximum(1.0, 2.0, 0.3, u), -ps.bridge_minimum(-1.0, -2.0, 0.3, u))


def test_crossing_probability_edges():
    assert float(ps.crossing_probability(np.array(1.0), np.array(-1.0), 0.0, np.array(0.1))) == 1.0
    p = float(ps.crossing_probability(np.array(1.0), np.array(1.0), 0.0, np.array(0.5)))
    assert p == pytest.approx(math.exp(-4.0))


def test_step_argmin_symmetric(rng):
    th = ps.sample_step_argmin(np.zeros(20000), np.zeros(20000), np.full(20000, -0.5), 1.0, np.ones(20000), rng)
    assert np.all((th > 0) & (th < 1))
    assert abs(th.mean() - 0.5) < 0.01


def test_running_minimum_functional(bm):
    p = ps.Path(0.0, 1.0, np.array([0.0, -1.0, -0.5, -2.0]), 3.0)
    mf = ps.running_minimum(p, bm)
    np.testing.assert_allclose(mf.H, [0, -1, -1, -2])
    assert mf.rho == 3.0
    np.testing.assert_allclose(mf.C, [0, 1, 1, 2])


def test_argmin_ties_earliest():
    p = ps.Path(0.0, 1.0, np.array([0.0, -1.0, 0.0, -1.0]), 3.0)
    assert ps.running_minimum(p).rho == 1.0


def test_excursions_above_minimum():
    p = ps.Path(0.0, 1.0, np.array([0.0, 1.0, 0.5, -1.0]), 3.0)
    recs = ps.extract_excursions(p, 1.0)
    assert len(recs) == 1
    r = recs[0]
    assert (r.u, r.level, r.duration, r.complete) == (0.0, 0.0, 3.0, True)


def test_excursions_disjoint(rng, bm):
    p = ps.sample_path(bm, 0.0, 0.01, 5.0, rng)
    recs = ps.extract_excursions(p, 0.01)
    for r0, r1 in zip(recs, recs[1:]):
        assert r0.u + r0.duration <= r1.u + 1e-12
        assert r1.level < r0.level
    for r in recs:
        assert np.all(r.fragment.values[1:-1] > r.level)


def test_min_duration_below_dt_rejected(rng, bm):
    p = ps.sample_path(bm, 0.0, 0.01, 0.1, rng)
    with pytest.raises(ValueError):
        ps.extract_excursions(p, 0.001)


def test_refined_durations():
    new = np.array([[True, False, False, True, False]])
    d = ps.excursion_durations_refined(new, 0.1)[0]
    assert d[0] == 3
    assert d[3] > new.shape[1]  # no later new minimum


def test_hitting_laplace_mc(bm_drift, rng):
    mean, se = ps.hitting_laplace_mc(bm_drift, 1.0, 0.0, 1.0, 1e-3, 4000, rng)
    exact = math.exp(-(0.5 + 1.5))
    assert abs(mean - exact) < 4 * se
