import math

import numpy as np
import pytest
from scipy import stats as sps

from excursus import ppp
from excursus.stats import ks_test


@pytest.fixture(scope="module")
def level_runs(bm_drift):
    rng = np.random.default_rng(3)
    return [ppp.sample_excursion_process(bm_drift, 0.0, 0.01, rng) for _ in range(1000)]


def test_escape_exactly_once_and_last(level_runs):
    for pts in level_runs:
        assert pts[-1].escaped
        assert sum(p.escaped for p in pts) == 1


def test_levels_decrease_and_starts_above(level_runs):
    for pts in level_runs:
        lv = np.array([p.level for p in pts])
        assert np.all(np.diff(lv) < 0) and lv[0] <= 0.0
        for p in pts[:-1]:
            assert p.start > p.level


def test_stop_level_is_exponential(level_runs):
    # the escape level is the global minimum: 0 - Exp(2 mu) with mu = 1/2
    depth = np.array([-pts[-1].level for pts in level_runs])
    assert ks_test(depth, sps.expon.cdf).passed()


def test_fragments_return_to_level(bm_drift):
    rng = np.random.default_rng(5)
    pts = ppp.sample_excursion_process(bm_drift, 0.0, 0.02, rng, dt=1e-3, fragments=True, fragment_horizon=1.0)
    for p in pts[:-1]:
        v = p.excursion.values
        assert v[-1] == pytest.approx(p.level)
        assert np.all(v[:-1] > p.level)
    assert np.all(pts[-1].excursion.values[1:] > pts[-1].level)


def test_recurrent_needs_floor(bm):
    with pytest.raises(Exception):
        ppp.sample_excursion_process(bm, 0.0, 0.01, np.random.default_rng(0))
    pts = ppp.sample_excursion_process(bm, 0.0, 0.05, np.random.default_rng(0), y_min=-0.5)
    assert all(not p.escaped and p.level >= -0.5 for p in pts)


def test_eps_below_dt_rejected(bm_drift):
    with pytest.raises(ValueError):
        ppp.verify_levy_system(bm_drift, 0.0, eps=1e-4, dt=1e-3, n=10)


@pytest.mark.parametrize("z_choice,f_choice", [("exp", "duration"), ("indicator", "laplace"), ("exp", "height"),
                                               ("exp", "zero")])
def test_levy_system_small(bm_drift, z_choice, f_choice):
    rep = ppp.verify_levy_system(bm_drift, 0.0, z_choice, f_choice, eps=0.01, n=1500, seed=1, dt=1e-3)
    if f_choice == "zero":
        assert rep.lhs == 0.0 and rep.rhs == 0.0
        return
    assert abs(rep.z_score) < 4.0
    assert rep.rhs_quadrature == pytest.approx(rep.rhs, rel=0.1)
