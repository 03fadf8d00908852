from __future__ import annotations

import numpy as np
import pytest

from hpcblowup.burgers import wbar, wbar_deriv
from hpcblowup.diagnostics import (
    FitError,
    continuation_integral,
    cusp_envelope,
    fit_blowup_rate,
    fit_cusp_exponent,
    gradient_continuity_modulus,
    profile_distance,
    regularity_contrast,
)
from hpcblowup.model import ModelParams, PhysicalState
from hpcblowup.modulation import SelfSimilarSnapshot, selfsimilar_grid
from hpcblowup.solver import NormSeries, RunTrace, SlopeSeries

T_STAR = 0.01


def _state(x, w):
    return PhysicalState(0.0, 0.0, x, w, np.zeros_like(x), np.zeros_like(x))


def _slopes(t):
    m = -1 / (T_STAR - t)
    return SlopeSeries(t, m, np.zeros_like(t))


@pytest.fixture(scope="module")
def params():
    return ModelParams.create(epsilon=0.01, M=12.0, blowup_regime=False)


@pytest.fixture(scope="module")
def synthetic_trace(params):
    t = np.linspace(0, 0.0099, 400)
    lag = T_STAR - t
    norms = NormSeries(
        t=t,
        qx=0.5 / lag,
        ux=0.5 / lag,
        zx=np.ones_like(t),
        phixx=np.full_like(t, 2.0),
    )
    return RunTrace([], _slopes(t), norms, "slope-threshold", params, t.size)


def test_rate_fit():
    t = np.linspace(0, 0.0099, 200)
    fit = fit_blowup_rate(_slopes(t))
    assert fit.t_star == pytest.approx(T_STAR, rel=1e-8)
    assert fit.exponent == pytest.approx(-1, abs=1e-6)
    assert fit.residual < 1e-6
    assert fit.decades == pytest.approx(2)
    assert fit.n_samples == 200
    assert not fit.extrapolated
    assert fit.t_star_uncertainty > 0
    assert fit.free_exponent == pytest.approx(-1, abs=1e-4)
    assert fit.free_t_star == pytest.approx(T_STAR, rel=1e-5)


def test_rate_fit_free_blowup_time():
    t = np.linspace(0, 0.0099, 200)
    m = -((T_STAR - t) ** -0.8)
    fit = fit_blowup_rate(SlopeSeries(t, m, np.zeros_like(t)))
    assert fit.free_exponent == pytest.approx(-0.8, abs=5e-3)
    assert fit.free_t_star == pytest.approx(T_STAR, rel=1e-3)
    assert fit.residual > 0


def test_rate_fit_drops_early_transient():
    t = np.linspace(0, 0.0099, 200)
    series = _slopes(t)
    # slope first decreases in magnitude, then blows up
    early = np.concatenate([np.full(20, -500.0), series.min_wx[20:]])
    fit = fit_blowup_rate(SlopeSeries(t, early, series.argmin_x))
    assert fit.t_star == pytest.approx(T_STAR, rel=1e-6)
    assert fit.n_samples < 200


def test_rate_fit_resolution_cut():
    t = np.linspace(0, 0.0099, 200)
    fit = fit_blowup_rate(_slopes(t), min_decades=0.9, dx=1e-3, max_resolution=1.0)
    # |min w_x| dx <= 1 keeps |min w_x| <= 1000
    assert fit.decades == pytest.approx(1, abs=0.03)
    assert fit.t_star == pytest.approx(T_STAR, rel=1e-6)


def test_rate_fit_errors():
    t = np.linspace(0, 0.0099, 10)
    with pytest.raises(FitError, match="usable samples"):
        fit_blowup_rate(_slopes(t))

    t = np.linspace(0, 0.003, 100)
    with pytest.raises(FitError, match="decades"):
        fit_blowup_rate(_slopes(t))

    t = np.linspace(0, 1, 100)
    with pytest.raises(FitError):
        fit_blowup_rate(SlopeSeries(t, np.ones_like(t), t))


def test_cusp_exponent():
    x = np.linspace(-1, 1, 20001)
    fit = fit_cusp_exponent(_state(x, -np.cbrt(x)), 0.0)
    assert fit.exponent == pytest.approx(1 / 3, abs=1e-3)
    assert fit.left == pytest.approx(fit.right, abs=1e-3)
    assert fit.asymmetry < 1e-3
    assert fit.gradient_exponent == pytest.approx(-2 / 3, abs=0.05)
    assert fit.decades > 2.5


def test_cusp_exponent_narrow_window():
    x = np.linspace(-1, 1, 201)
    with pytest.raises(FitError, match="decades"):
        fit_cusp_exponent(_state(x, -np.cbrt(x)), 0.0, outer=0.05)


def test_cusp_envelope():
    x = np.linspace(-1, 1, 20001)
    s = 6.2
    inside = cusp_envelope(_state(x, -0.9 * np.cbrt(x)), 0.0, s)
    assert inside.passed
    assert inside.worst_lower == pytest.approx(0.3 / 0.35, rel=1e-3)
    assert inside.worst_upper == pytest.approx(0.25 / 0.3, rel=1e-3)
    assert inside.n_samples > 0

    flat = cusp_envelope(_state(x, -0.5 * np.cbrt(x)), 0.0, s)
    assert not flat.passed
    assert flat.worst_upper > 1


def test_continuity_modulus():
    x = np.linspace(-1, 1, 2001)
    assert gradient_continuity_modulus(_state(x, np.sin(x)), 0.0, 0.05) < 2e-3
    assert gradient_continuity_modulus(_state(x, 2 * x), 0.0, 0.05) == pytest.approx(0, abs=1e-9)


def test_continuation_integral(synthetic_trace):
    result = continuation_integral(synthetic_trace)
    assert result.integral[0] == 0
    assert np.all(np.diff(result.integral) > 0)
    assert result.log_coefficient == pytest.approx(1, abs=0.05)
    assert result.diverging

    stopped = synthetic_trace._replace(stop_reason="t-limit")
    assert not continuation_integral(stopped).diverging


def test_regularity_contrast(synthetic_trace):
    contrast = regularity_contrast(synthetic_trace)
    assert contrast.phixx_growth == pytest.approx(1)
    assert contrast.wx_growth == pytest.approx(100)
    assert contrast.max_zx == 1
    assert contrast.bound_zx == 24


def test_profile_distance(params):
    y = selfsimilar_grid(1000)
    zero = np.zeros_like(y)
    stack = np.array([wbar_deriv(y, n) for n in range(1, 5)])
    snapshot = SelfSimilarSnapshot(
        s=2.0,
        t=0.0,
        y_grid=y,
        W=wbar(y),
        Z=zero,
        Phi=zero,
        sigma=zero + 1,
        U=zero,
        dW=stack,
        dZ=np.zeros((4, y.size)),
        dPhi=np.zeros((5, y.size)),
    )
    distance = profile_distance(snapshot, params)
    assert distance.s == 2.0
    assert distance.inner == pytest.approx(0, abs=1e-12)
    assert distance.middle == pytest.approx(0, abs=1e-12)
    assert 0.25 < distance.outer < 0.4

    shifted = snapshot._replace(dW=stack + 0.01)
    assert profile_distance(shifted, params).inner == pytest.approx(0.01)
