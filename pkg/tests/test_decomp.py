import math

import numpy as np
import pytest
from scipy import integrate, stats as sps

from excursus import decomp
from excursus.decomp import HAT, REVERSED, BridgeLaw
from excursus.eigen import NotTransientError
from excursus.spec import brownian
from excursus.stats import ks2_test, ks_test


def _density_cdf(spec, law, t):
    top = law.endpoint + 8 * math.sqrt(law.length) + 1
    z = np.linspace(law.y, top, 4001)[1:]
    d = decomp.bridge_marginal_density(spec, law, t, z)
    c = integrate.cumulative_trapezoid(d, z, initial=0.0)
    return lambda v: np.interp(v, z, c / c[-1])


def test_minimum_law(bm_drift):
    assert decomp.verify_minimum_law(bm_drift, 0.0, 4000, 0).passed()


def test_minimum_cdf_formula(bm_drift):
    # r(y) = e^{-y}: P(gamma <= y) = e^{y - x}
    np.testing.assert_allclose(decomp.minimum_cdf(bm_drift, 0.5, [-1.0, 0.0, 1.0]), [math.exp(-1.5), math.exp(-0.5), 1])


def test_minimum_needs_transience(bm):
    with pytest.raises(NotTransientError):
        decomp.sample_minimum(bm, 0.0, np.random.default_rng(0))


def test_bessel_minimum_uniform_in_reciprocal(bes3):
    # P^x(gamma <= y) = y / x
    g, rho = decomp.sample_minimum(bes3, 1.0, np.random.default_rng(2), n=3000, with_rho=False)
    assert np.all(np.isnan(rho))
    assert ks_test(g, lambda v: np.clip(v, 0, 1)).passed()


def test_rho_given_gamma_is_passage_time(bm_drift):
    rng = np.random.default_rng(4)
    g, rho = decomp.sample_minimum(bm_drift, 0.0, rng, n=20000)
    # rho given gamma = y is inverse Gaussian with mean |y| / nu
    nu = math.sqrt(0.25)
    assert np.mean(rho * nu / -g) == pytest.approx(1.0, abs=0.03)


def test_conditioned_down_ends_at_floor(bm_drift, rng):
    p = decomp.sample_conditioned_down(bm_drift, 1.0, 0.0, rng)
    assert p.values[-1] == 0.0 and p.absorbed
    assert np.all(p.values[:-1] > 0.0)
    with pytest.raises(ValueError):
        decomp.sample_conditioned_down(bm_drift, 0.0, 1.0, rng)


def test_conditioned_down_lifetime_mean(bm_drift, rng):
    # conditioned to hit 0 the drift becomes -1/2: E T = x / (1/2)
    life = decomp.conditioned_down_lifetimes(bm_drift, 1.0, np.zeros(4000), rng)
    assert np.mean(life) == pytest.approx(2.0, rel=0.05)


def test_conditioned_up_stays_above(bm_drift, rng):
    p = decomp.sample_conditioned_up(bm_drift, 0.0, 1.0, rng)
    assert p.values[0] == 0.0
    assert np.all(p.values[1:] > 0.0)


def test_conditioned_up_entrance_insensitive(bm_drift):
    rng = np.random.default_rng(8)
    a = [decomp.sample_conditioned_up(bm_drift, 0.0, 0.3, rng, delta=bm_drift.h).values[-1] for _ in range(300)]
    b = [decomp.sample_conditioned_up(bm_drift, 0.0, 0.3, rng, delta=bm_drift.h / 2).values[-1] for _ in range(300)]
    assert ks2_test(a, b).passed()


def test_williams_splice(bm_drift, rng):
    w = decomp.williams_sample(bm_drift, 0.0, rng)
    assert w.full.values.min() == w.gamma
    assert w.pre.values[-1] == w.gamma
    assert w.zeta == math.inf


def test_williams_batch_deterministic(bm_drift):
    a = decomp.williams_batch(bm_drift, 0.0, 500, 3, threads=2, block=100)
    b = decomp.williams_batch(bm_drift, 0.0, 500, 3, threads=1, block=100)
    np.testing.assert_array_equal(a["gamma"], b["gamma"])
    np.testing.assert_array_equal(a["rho"], b["rho"])


@pytest.mark.parametrize("mu,beta,alpha", [(0.5, 0.0, 1.0), (0.3, 0.2, 0.5)])
def test_minimum_laplace(mu, beta, alpha):
    spec = brownian(mu, beta)
    rep = decomp.verify_minimum_laplace(spec, 0.0, 2000, 1, alpha=alpha)
    nu = math.sqrt(mu * mu + 2 * beta)
    k = mu + nu
    # gamma ~ -Exp(k), rho | gamma=y has transform exp(-(sqrt(nu^2 + 2 alpha) - nu)|y|)
    exact = k / (k + math.sqrt(nu * nu + 2 * alpha) - nu)
    assert rep["quadrature"] == pytest.approx(exact, rel=1e-4)
    assert abs(rep["z_score"]) < 4


def test_minimum_joint_density_value(bm):
    # f(1/2; 0, -1/2)^2 with f(u; d) = d exp(-d^2 / 2u) / sqrt(2 pi u^3)
    assert float(decomp.minimum_joint_density(bm, 0.0, 1.0, 0.5, -0.5, 0.0)) == pytest.approx(0.1930647053, rel=1e-8)


def test_minimum_joint_density_reversal_symmetry(bm):
    a = decomp.minimum_joint_density(bm, 0.0, 1.0, 0.3, -0.4, 0.2)
    b = decomp.minimum_joint_density(bm, 0.2, 1.0, 0.7, -0.4, 0.0)
    assert float(a) == pytest.approx(float(b), rel=1e-12)
    assert float(decomp.minimum_joint_density(bm, 0.0, 1.0, 0.5, 0.1, 0.3)) == 0.0
    with pytest.raises(ValueError):
        decomp.minimum_joint_density(bm, 0.0, 1.0, 1.0, -0.5, 0.0)


def test_bin_masses_sum_to_one():
    m = decomp._brownian_bin_mass(1.0, 0.0, np.array(decomp.LOCAL_Y_EDGES), np.array(decomp.LOCAL_U_EDGES),
                                  np.array(decomp.LOCAL_X_EDGES))
    assert m.sum() == pytest.approx(1.0, abs=1e-6)


def test_local_decomposition_small(bm):
    rep = decomp.verify_local_decomposition(bm, n=8000, seed=2, conditional=False)
    assert rep.passed


def test_bridge_law_validation():
    with pytest.raises(ValueError):
        BridgeLaw("sideways", 0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        BridgeLaw(HAT, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        BridgeLaw(HAT, 0.0, 0.0, 1.0)


@pytest.mark.parametrize("kind", [HAT, REVERSED])
def test_bridge_endpoints(bm_drift, kind, rng):
    law = BridgeLaw(kind, 0.0, 1.0, 0.8)
    p = decomp.sample_bridge(bm_drift, law, 0.05, rng)
    start, end = (0.0, 0.8) if kind == HAT else (0.8, 0.0)
    assert p.values[0] == start and p.values[-1] == end
    assert np.all(p.values[1:-1] > 0.0)


def test_hat_bridge_marginal(bm_drift, rng):
    law = BridgeLaw(HAT, 0.0, 1.0, 1.0)
    v = decomp.sample_bridge_marginal(bm_drift, law, 0.5, 3000, rng)
    assert ks_test(v, _density_cdf(bm_drift, law, 0.5)).passed()


def test_bridge_reversal(bm_drift, rng):
    hat = decomp.sample_bridge_marginal(bm_drift, BridgeLaw(HAT, 0.0, 1.0, 1.0), 0.3, 3000, rng)
    rev = decomp.sample_bridge_marginal(bm_drift, BridgeLaw(REVERSED, 0.0, 1.0, 1.0), 0.7, 3000, rng)
    assert ks2_test(hat, rev).passed()


def test_bridge_length_must_fit_grid(bm_drift, rng):
    with pytest.raises(ValueError):
        decomp.sample_bridges(bm_drift, BridgeLaw(HAT, 0.0, 1.0, 1.0), 0.3, 10, rng)
