import math

import numpy as np
import pytest

from excursus.spec import (LOWER, UPPER, Interval, SpecError, brownian, build_spec, classify_boundary,
                           parse_selector, resolve_spec, spec_from_mapping, write_spec_file)


def test_sde_form_standard_bm_normalisation():
    s = build_spec(drift=lambda x: 0 * x, sigma=lambda x: 1 + 0 * x, window=(-5, 5))
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(s.scale(x) - s.scale(np.array(0.0)), x, atol=1e-10)
    np.testing.assert_allclose(s.speed_density(x), 2.0, rtol=1e-10)


def test_sde_form_drift_scale_and_speed():
    mu = 0.5
    s = build_spec(drift=lambda x: mu + 0 * x, sigma=lambda x: 1 + 0 * x, window=(-5, 5))
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(s.scale_derivative(x), np.exp(-2 * mu * x), rtol=1e-8)
    np.testing.assert_allclose(s.speed_density(x), 2 * np.exp(2 * mu * x), rtol=1e-8)


def test_scale_form_recovers_sde():
    s = build_spec(scale=lambda x: x, scale_derivative=lambda x: 1 + 0 * x, speed_density=lambda x: 2 + 0 * x,
                   window=(-5, 5))
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(s.drift(x), 0.0, atol=1e-8)
    np.testing.assert_allclose(s.sigma(x), 1.0, rtol=1e-8)


def test_inconsistent_dual_form_rejected():
    with pytest.raises(SpecError):
        build_spec(drift=lambda x: 0 * x, sigma=lambda x: 1 + 0 * x, scale=lambda x: x,
                   scale_derivative=lambda x: 1 + 0 * x, speed_density=lambda x: 3 + 0 * x, window=(-5, 5))


def test_nonpositive_sigma_rejected():
    with pytest.raises(SpecError):
        build_spec(drift=lambda x: 0 * x, sigma=lambda x: x, window=(-1, 1))


def test_lower_end_in_state_space_rejected():
    with pytest.raises(SpecError):
        Interval(0.0, 1.0, lower_in_E=True)


def test_boundary_classes(bm, bm_drift, bes3, bm_abs):
    assert classify_boundary(bm, LOWER).kind == "natural"
    assert classify_boundary(bm, UPPER).kind == "natural"
    up = classify_boundary(bm_drift, UPPER)
    assert up.kind == "natural"
    assert up.scale_at_end == pytest.approx(1.0, rel=1e-6)
    assert classify_boundary(bes3, LOWER).kind == "entrance"
    assert classify_boundary(bes3, UPPER).kind == "natural"
    assert classify_boundary(bm_abs, LOWER).kind == "regular-absorbing"


def test_kill_free_flag():
    assert brownian().kill_free
    assert not brownian(0.0, 0.3).kill_free


def test_selector_parsing_and_presets():
    cfg = parse_selector("bm-drift:mu=0.25,window_lo=-10")
    assert cfg == {"kind": "bm-drift", "mu": "0.25", "window_lo": "-10"}
    s = resolve_spec("bm-drift:mu=0.25,window_lo=-10")
    assert s.mu == 0.25 and s.window[0] == -10
    with pytest.raises(SpecError, match="valid presets"):
        resolve_spec("nonsense")


def test_custom_expression_spec():
    s = spec_from_mapping({"kind": "custom", "drift_expr": "-x", "sigma_expr": "1", "window_lo": "-6",
                           "window_hi": "6"})
    np.testing.assert_allclose(s.drift(np.array([1.0, -2.0])), [-1.0, 2.0])
    # Ornstein-Uhlenbeck: s' = exp(x^2)
    x = np.array([0.5, 1.0])
    ratio = s.scale_derivative(x) / s.scale_derivative(np.array(0.0))
    np.testing.assert_allclose(ratio, np.exp(x * x), rtol=1e-6)


def test_spec_file_round_trip(tmp_path):
    p = tmp_path / "spec.txt"
    write_spec_file(p, {"kind": "killed-bm", "mu": 0.2, "beta": 0.5})
    s = resolve_spec(str(p))
    assert s.mu == pytest.approx(0.2) and s.beta == pytest.approx(0.5)


def test_expression_rejects_unknown_names():
    with pytest.raises(SpecError):
        spec_from_mapping({"kind": "custom", "drift_expr": "__import__('os')", "sigma_expr": "1"})
