import numpy as np
import pytest
from scipy import stats as sps

from excursus.stats import EmpiricalLaw, GofReport, Welford, chi2_test, ks2_test, ks_test, merge_small_bins, z_score


def test_ks_matches_scipy(rng):
    x = rng.standard_normal(500)
    ours = ks_test(x, sps.norm.cdf)
    ref = sps.kstest(x, "norm", method="asymp")
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_rejects_wrong_law(rng):
    assert not ks_test(rng.standard_normal(2000) + 0.3, sps.norm.cdf).passed()


def test_ks_requires_samples():
    with pytest.raises(ValueError):
        ks_test(np.zeros(5), sps.norm.cdf)


def test_ks2_matches_scipy(rng):
    a, b = rng.standard_normal(400), rng.standard_normal(300) + 0.1
    ours = ks2_test(a, b)
    ref = sps.ks_2samp(a, b, method="asymp")
    assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)


def test_weighted_ecdf():
    law = EmpiricalLaw([2.0, 1.0], [1.0, 3.0])
    x, F = law.ecdf()
    np.testing.assert_allclose(x, [1, 2])
    np.testing.assert_allclose(F, [0.75, 1.0])
    assert law.effective_n == pytest.approx(16 / 10)
    with pytest.raises(ValueError):
        EmpiricalLaw([1.0], [-1.0])


def test_chi2_merges_small_bins():
    c, e = merge_small_bins([1, 2, 10, 1], [1.0, 2.0, 10.0, 1.0])
    np.testing.assert_allclose(c, [14.0])
    np.testing.assert_allclose(e, [14.0])
    c, e = merge_small_bins([3, 4, 5, 2], [3.0, 4.0, 5.0, 2.0])
    np.testing.assert_allclose(e, [7.0, 7.0])


def test_chi2_exact_fit():
    rep = chi2_test([10, 20, 30], [10, 20, 30])
    assert rep.statistic == 0.0 and rep.p_value == 1.0


def test_welford_merge_associative(rng):
    x = rng.standard_normal(1001)
    a = Welford().add(x[:300]).merge(Welford().add(x[300:]))
    assert a.mean == pytest.approx(x.mean(), rel=1e-12)
    assert a.variance == pytest.approx(x.var(ddof=1), rel=1e-12)
    assert a.se == pytest.approx(x.std(ddof=1) / np.sqrt(x.size), rel=1e-12)


def test_z_score():
    assert z_score(1.0, 0.3, 0.0, 0.4) == pytest.approx(2.0)
    assert z_score(1.0, 0.0, 1.0, 0.0) == 0.0


def test_report_clipped_and_serialised():
    r = GofReport(0.1, 1.2, 10, "ks")
    assert r.p_value == 1.0
    assert '"test": "ks"' in r.to_json()
