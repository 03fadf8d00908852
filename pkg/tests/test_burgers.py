from __future__ import annotations

import numpy as np
import pytest

from hpcblowup import burgers
from hpcblowup.burgers import (
    OrderError,
    check_profile_properties,
    profile_grid,
    profile_table,
    wbar,
    wbar_cardano,
    wbar_deriv,
)


def test_origin_values():
    assert wbar(0.0) == 0
    assert wbar_deriv(0.0, 1) == pytest.approx(-1, abs=1e-14)
    assert wbar_deriv(0.0, 2) == pytest.approx(0, abs=1e-14)
    assert wbar_deriv(0.0, 3) == pytest.approx(6, abs=1e-12)


def test_cubic_identity_and_symmetry():
    y = profile_grid(1e6, 20_001)
    w = wbar(y)
    np.testing.assert_allclose((w**3 + w + y) / np.maximum(1, np.abs(y)), 0, atol=1e-12)
    np.testing.assert_allclose(wbar(-y), -w, rtol=0, atol=1e-10)
    assert np.all(wbar_deriv(y, 1) < 0)


def test_cardano_agrees_on_moderate_range():
    y = np.linspace(-50, 50, 1001)
    np.testing.assert_allclose(wbar(y), wbar_cardano(y), atol=1e-10)


def test_scalar_and_array():
    assert isinstance(wbar(1.0), float)
    assert isinstance(wbar_deriv(1.0, 2), float)
    assert wbar(np.array([1.0, 2.0])).shape == (2,)


def test_known_value():
    # W = -1 solves W^3 + W + 2 = 0
    assert wbar(2.0) == pytest.approx(-1.0, abs=1e-14)
    # W' = -1/(1 + 3W^2)
    assert wbar_deriv(2.0, 1) == pytest.approx(-0.25)


def test_derivatives_match_finite_differences():
    y = np.linspace(-3, 3, 61)
    h = 1e-4
    for n in range(1, 5):
        lower_p = wbar(y + h) if n == 1 else wbar_deriv(y + h, n - 1)
        lower_m = wbar(y - h) if n == 1 else wbar_deriv(y - h, n - 1)
        fd = (lower_p - lower_m) / (2 * h)
        np.testing.assert_allclose(wbar_deriv(y, n), fd, atol=1e-5 * max(1, np.abs(fd).max()))


def test_order_out_of_range():
    with pytest.raises(OrderError):
        wbar_deriv(0.0, 0)
    with pytest.raises(OrderError):
        wbar_deriv(0.0, 6)


def test_non_finite_argument():
    with pytest.raises(ValueError):
        wbar(np.inf)


def test_profile_table():
    y = np.array([-1.0, 0.0, 1.0])
    sample = profile_table(y)
    assert sample.values.shape == (6, 3)
    assert sample.column_names() == ["y", "W", "dW1", "dW2", "dW3", "dW4", "dW5"]
    assert sample.values[1, 1] == pytest.approx(-1)


def test_profile_grid():
    y = profile_grid(1e6, 100_000)
    assert 0.0 in y
    assert y[0] == pytest.approx(-1e6)
    assert y[-1] == pytest.approx(1e6)
    assert np.all(np.diff(y) > 0)


def test_profile_properties():
    report = check_profile_properties(profile_grid())
    assert report.all_passed(), report.failed()
    assert report.ode_residual < 1e-10
    assert report.cubic_residual < 1e-10


def test_profile_properties_detect_shift():
    burgers.wbar.replace_implementation(lambda y: burgers.wbar.original_impl()(y) + 0.5)
    try:
        report = check_profile_properties(profile_grid(1e3, 2001))
    finally:
        burgers.wbar.reset_implementation()
    assert not report.all_passed()
    assert "origin" in report.failed()


def test_empty_grid():
    with pytest.raises(ValueError):
        check_profile_properties(np.array([]))
