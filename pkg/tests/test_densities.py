import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from excursus import densities as dens
from excursus.spec import brownian


def test_passage_density_closed_form(bm):
    f = dens.first_passage_density(bm, np.array([1.0]), 1.0, 0.0)[0]
    assert f == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-12)
    assert f == pytest.approx(0.24197072451914337, rel=1e-10)


def test_passage_density_rejects_bad_input(bm):
    with pytest.raises(ValueError):
        dens.first_passage_density(bm, np.array([0.0]), 1.0, 0.0)
    with pytest.raises(ValueError):
        dens.first_passage_density(bm, np.array([1.0]), 0.5, 0.5)


def test_passage_mass_with_drift():
    spec = brownian(0.5)
    val, _ = integrate.quad(lambda t: dens.first_passage_density(spec, np.array([t]), 1.0, 0.0)[0], 0, np.inf,
                            limit=200)
    assert val == pytest.approx(math.exp(-1.0), rel=1e-6)
    assert dens.hit_probability(spec, 1.0, 0.0) == pytest.approx(math.exp(-1.0), rel=1e-6)


def test_stehfest_matches_closed_form(bm_drift):
    t = np.array([0.5, 1.0, 2.0])
    exact = dens.first_passage_density(bm_drift, t, 1.0, 0.0)
    alpha_fn = lambda a: math.exp(-(0.5 + math.sqrt(0.25 + 2 * a)))
    inv = dens.stehfest_invert(lambda s: np.array([alpha_fn(float(v)) for v in np.ravel(s)]).reshape(np.shape(s)), t,
                               check=False)
    np.testing.assert_allclose(inv, exact, rtol=2e-3)


def test_killed_density_image_formula(bm):
    t, x, z, y = 0.7, 0.4, 1.1, 0.0
    g = lambda d: math.exp(-d * d / (2 * t)) / math.sqrt(2 * math.pi * t)
    exact = (g(z - x) - g(z + x)) / 2.0  # density w.r.t. m(dz) = 2 dz
    val = float(dens.killed_density(bm, np.array([t]), np.array([x]), np.array([z]), y)[0])
    assert val == pytest.approx(exact, rel=1e-6)


def test_killed_density_symmetric(bm_drift):
    t = np.array([0.5])
    a = dens.killed_density(bm_drift, t, np.array([0.3]), np.array([1.2]), 0.0)
    b = dens.killed_density(bm_drift, t, np.array([1.2]), np.array([0.3]), 0.0)
    assert float(a[0]) == pytest.approx(float(b[0]), rel=1e-6)


def test_killed_chapman_kolmogorov(bm):
    s, t, x, z, y = 0.3, 0.5, 0.5, 0.9, 0.0
    w = np.linspace(1e-4, 10, 4001)
    left = dens.killed_density(bm, np.full_like(w, s), np.full_like(w, x), w, y)
    right = dens.killed_density(bm, np.full_like(w, t), w, np.full_like(w, z), y)
    val = integrate.simpson(left * right * 2.0, x=w)
    total = float(dens.killed_density(bm, np.array([s + t]), np.array([x]), np.array([z]), y)[0])
    assert val == pytest.approx(total, rel=1e-5)


@pytest.mark.parametrize("t,x", [(0.5, 0.3), (1.0, 1.0), (2.0, 0.7)])
def test_entrance_routes_agree(bm_drift, t, x):
    a = dens.entrance_density(bm_drift, t, x, 0.0, method="passage")
    b = dens.entrance_density(bm_drift, t, x, 0.0, method="kernel")
    assert float(b) == pytest.approx(float(a), rel=1e-4)


def test_entrance_zero_below_level(bm):
    assert float(dens.entrance_density(bm, 1.0, -0.5, 0.0)) == 0.0


def test_excursion_tail_mass(bm):
    # n(zeta > eps) = 2 / sqrt(2 pi eps) w.r.t. m = 2 dx
    eps = 0.01
    assert dens.excursion_tail_mass(bm, 0.0, eps) == pytest.approx(2 / math.sqrt(2 * math.pi * eps), rel=1e-5)
    assert dens.excursion_tail_mass(bm, 0.0, eps) == pytest.approx(7.978845608, rel=1e-5)


def test_passage_cdf_inverse(bm_drift):
    cdf = dens.passage_cdf(bm_drift, 1.0, 0.0)
    assert cdf.total == pytest.approx(math.exp(-1.0), rel=1e-6)
    assert cdf.cdf[-1] == pytest.approx(cdf.total, rel=1e-5)
    p = np.array([0.1, 0.5, 0.9]) * cdf.total
    np.testing.assert_allclose(cdf(cdf.inverse(p)), p, rtol=1e-3)
