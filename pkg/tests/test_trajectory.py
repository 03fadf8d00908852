from __future__ import annotations

import numpy as np
import pytest
import scipy.integrate

from hpcblowup.burgers import wbar, wbar_deriv
from hpcblowup.model import ModelParams, PhysicalState
from hpcblowup.modulation import (
    ModulationState,
    SelfSimilarSeries,
    SelfSimilarSnapshot,
    WindowError,
    selfsimilar_grid,
)
from hpcblowup.solver import NormSeries, RunTrace, SlopeSeries
from hpcblowup.trajectory import (
    TAIL_RATE,
    SampledField,
    TrajectoryPath,
    characteristic_separation,
    integrate_trajectory,
    path_decay_integral,
    path_lower_bound,
    sample_along_path,
    transport_along_path,
)

TAU = 0.01


@pytest.fixture(scope="module")
def params():
    return ModelParams.create(epsilon=TAU, beta=0.0, M=12.0, L=0.2, N=32000, blowup_regime=False)


def stable_frame(s, params):
    mod = ModulationState.at(TAU - np.exp(-s), TAU, 0.0, params.kappa0, xi_dot=5.0)
    y = selfsimilar_grid(1000)
    zero = np.zeros_like(y)
    snapshot = SelfSimilarSnapshot(
        s=mod.s,
        t=mod.t,
        y_grid=y,
        W=wbar(y),
        Z=zero,
        Phi=zero,
        sigma=zero + 1,
        U=zero,
        dW=np.array([wbar_deriv(y, n) for n in range(1, 5)]),
        dZ=np.zeros((4, y.size)),
        dPhi=np.zeros((5, y.size)),
    )
    return mod, snapshot


@pytest.fixture(scope="module")
def series(params):
    # the W velocity of this frame is 3y/2 + W(y)
    return SelfSimilarSeries([stable_frame(s, params) for s in (3.0, 4.0, 5.0, 6.0)])


def test_sampled_field():
    grid = np.linspace(-1, 1, 11)
    field = SampledField(np.array([0.0, 1.0]), [grid, 2 * grid], [grid, 2 * grid])
    assert field(0.5, 0.4) == pytest.approx(0.6)
    assert field.window(0.5) == pytest.approx((-1.5, 1.5))
    with pytest.raises(ValueError):
        SampledField(np.array([0.0]), [grid], [grid])


def test_w_trajectory_escapes(series, params):
    path = integrate_trajectory("W", 1.0, 3.0, 6.0, series, params)
    assert path.velocity == "W"
    assert path.s[0] == 3.0
    assert path.psi[0] == pytest.approx(1.0)
    assert np.all(np.diff(path.psi) > 0)

    # |W(y)| <= |y| keeps the velocity above y/2
    assert path_lower_bound(path, 0.5).passed
    assert not path_lower_bound(path, 1.5).passed

    values = sample_along_path(path, series, lambda snap, mod: snap.W)
    assert np.allclose(values, wbar(path.psi), atol=1e-3)


def test_w_trajectory_exits_window(series, params):
    path = integrate_trajectory("W", 100.0, 3.0, 6.0, series, params)
    assert path.exited
    assert path.s[-1] < 6.0
    assert path.psi[-1] == pytest.approx(1000, rel=1e-3)


def test_origin_is_fixed(series, params):
    path = integrate_trajectory("W", 1e-6, 3.0, 4.0, series, params)
    # linearization 3/2 - 1 = 1/2 at the origin
    assert path.psi[-1] == pytest.approx(1e-6 * np.exp(0.5), rel=3e-3)


def test_trajectory_errors(series, params):
    with pytest.raises(ValueError, match="not covered"):
        integrate_trajectory("W", 1.0, 2.0, 5.0, series, params)
    with pytest.raises(WindowError):
        integrate_trajectory("W", 2000.0, 3.0, 5.0, series, params)
    with pytest.raises(ValueError, match="params"):
        integrate_trajectory("W", 1.0, 3.0, 5.0, series)


def test_decay_integral():
    s = np.linspace(0, 10, 2001)
    path = TrajectoryPath("W", 1.0, 0.0, s, np.exp(s), False)
    result = path_decay_integral(path)
    assert result.tail == pytest.approx(np.exp(-20 / 3) / (2 / 3 * TAIL_RATE))
    sampled = scipy.integrate.trapezoid((1 + path.psi**2) ** (-1 / 3), s)
    assert result.total == pytest.approx(sampled + result.tail)
    assert 0 < result.tail_fraction < 0.01
    assert result.total < 2


def test_transport_along_path():
    s = np.linspace(0, 2, 801)
    path = TrajectoryPath("U", 0.0, 0.0, s, np.zeros_like(s), False)
    damped = transport_along_path(path, np.ones_like(s), np.zeros_like(s), 2.0)
    assert np.allclose(damped, 2 * np.exp(-s), rtol=1e-5)
    forced = transport_along_path(path, np.ones_like(s), np.ones_like(s), 2.0)
    assert np.allclose(forced, 1 + np.exp(-s), rtol=1e-5)


def test_characteristic_separation(params):
    x = np.linspace(-params.L, params.L, params.N + 1)
    snapshots = []
    for t in np.linspace(0, 0.008, 5):
        s = -np.log(TAU - t)
        w = np.exp(-s / 2) * wbar((x - 5 * t) * np.exp(1.5 * s)) + params.kappa0
        snapshots.append(PhysicalState.at(t, x, w, np.zeros_like(x), np.zeros_like(x), params))
    empty = SlopeSeries(np.zeros(0), np.zeros(0), np.zeros(0))
    trace = RunTrace(snapshots, empty, NormSeries(*(np.zeros(0),) * 5), "t-limit", params, 0)

    # z moves left at speed 5, the steep front right at speed 5
    sep = characteristic_separation(trace, 0.05)
    assert sep.crossed
    assert sep.gap[0] == pytest.approx(0.05, abs=1e-6)
    assert sep.gap[-1] < 0
    assert sep.psi[-1] == pytest.approx(0.05 - 5 * 0.008, abs=2e-3)
    assert np.all(np.diff(sep.slope_integral) >= -1e-9)
    assert np.isfinite(sep.slope_integral[-1])

    with pytest.raises(ValueError):
        characteristic_separation(trace._replace(snapshots=snapshots[:1]), 0.05)
