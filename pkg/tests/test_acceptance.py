"""Acceptance criteria at full size with seed 0; one PASS/FAIL line per criterion."""
import time

import pytest

from excursus import harness

# (criterion number, check name, runtime limit in seconds)
CRITERIA = [
    (1, "resolvent_oracle", 5),
    (2, "hitting_laplace", 120),
    (3, "entrance_identity", 10),
    (4, "levy_system", 600),
    (5, "williams_minimum", 60),
    (6, "williams_laplace", 300),
    (7, "local_decomposition", 600),
    (8, "vervaat_forward", 120),
    (9, "vervaat_round_trip", 120),
    (10, "properties", 60),
]


def _summary(name, m):
    if name in ("resolvent_oracle", "entrance_identity"):
        return f"max rel error {m['max_rel_error']:.2e} (tol {m['tolerance']:g})"
    if name == "hitting_laplace":
        return (f"solver rel error {m['solver_rel_error']:.2e}; mc {m['mc']:.5f} vs {m['closed_form']:.5f}, "
                f"gap {m['mc_gap']:.2e} <= {m['mc_allowance']:.2e}")
    if name == "levy_system":
        return f"lhs {m['lhs']:.4f}, rhs {m['rhs']:.4f} (quadrature {m['rhs_quadrature']:.4f}), z {m['z_score']:+.2f}"
    if name == "williams_minimum":
        return f"KS p {m['p_value']:.3f}"
    if name == "williams_laplace":
        return f"empirical {m['empirical']:.4f} +- {m['se']:.4f} vs {m['quadrature']:.4f}, z {m['z_score']:+.2f}"
    if name == "local_decomposition":
        return (f"chi2 p {m['chi2']['p_value']:.3f}, -H KS p {m['minimum_ks']['p_value']:.3f}, "
                f"rho KS p {m['argmin_ks']['p_value']:.3f}")
    if name == "vervaat_forward":
        return f"KS p {m['refined']['p_value']:.3f} (grid-minimum variant p {m['grid_minimum']['p_value']:.2g})"
    if name == "vervaat_round_trip":
        return f"max error {m['max_abs_error']:.1e}, midpoint KS p {m['midpoint_ks']['p_value']:.3f}"
    if name == "properties":
        return ", ".join(f"{k} {'ok' if v['passed'] else 'FAIL'}" for k, v in m.items())
    return ""


@pytest.mark.parametrize("number,name,limit", CRITERIA, ids=[c[1] for c in CRITERIA])
def test_criterion(number, name, limit, capsys):
    cfg = harness.ExperimentConfig(spec="bm-drift:mu=0.5", seed=0, checks=[name])
    t0 = time.time()
    res = harness.ACCEPTANCE[name](cfg)
    secs = time.time() - t0
    ok = res.passed and secs < limit
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} {name}: {_summary(name, res.metrics)} "
              f"({secs:.1f} s, limit {limit} s)")
    assert res.passed, res.metrics
    assert secs < limit


def test_manifest_lists_every_criterion():
    assert list(harness.ACCEPTANCE) == [c[1] for c in CRITERIA]
