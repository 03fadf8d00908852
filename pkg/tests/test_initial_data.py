from __future__ import annotations

import numpy as np
import pytest

from hpcblowup import store
from hpcblowup.burgers import wbar
from hpcblowup.initial_data import (
    ConstructionError,
    InitialDataSpec,
    build,
    cutoff,
    validate,
)
from hpcblowup.model import ModelParams, background

# 64 points per inner scale ε^(3/2)
resolved = ModelParams.create(epsilon=0.04, M=1.0, L=1.25, N=20000, blowup_regime=False)


@pytest.fixture(scope="module")
def state():
    return build(InitialDataSpec(resolved))


def test_cutoff():
    x = np.linspace(-3, 3, 601)
    chi = cutoff(x, 1.0, 1.0)
    assert np.all(chi[np.abs(x) <= 1] == 1)
    assert np.all(chi[np.abs(x) >= 2] == 0)
    assert np.all(np.diff(chi[x >= 0]) <= 0)
    with pytest.raises(ValueError):
        cutoff(x, 1.0, 0.0)


def test_build(state):
    ε = resolved.epsilon
    center = resolved.N // 2
    assert state.t == 0
    assert state.w[center] == pytest.approx(resolved.kappa0)
    assert np.all(state.z == 0)
    assert state.phi[center] == pytest.approx(background(resolved).phi_bar + 0.1)
    slope = np.gradient(state.w, resolved.dx)
    assert slope.min() == pytest.approx(-1 / ε, rel=1e-2)
    assert state.x_grid[np.argmin(slope)] == pytest.approx(0, abs=resolved.dx)


def test_validate_resolved(state):
    report = validate(state, resolved)
    for cid in ("origin_jet", "amplitude", "companion_fields", "z_slope_weight", "positivity"):
        assert report.passed(cid), report[cid]
        assert report[cid].blocking
    assert report.blocking_failures() == []
    assert not report["slope_bounds.d1"].blocking
    assert report["slope_bounds.d1"].margin == pytest.approx(1, rel=2e-2)
    assert len(report.to_json()) == len(report.results)


def test_validate_unknown_constraint(state):
    report = validate(state, resolved)
    with pytest.raises(KeyError):
        report["no_such_constraint"]


def test_under_resolved_origin_is_advisory():
    params = resolved._replace(N=2000)
    report = validate(build(InitialDataSpec(params)), params)
    assert not report["origin_jet"].blocking
    assert "points per inner scale" in report["origin_jet"].note
    assert "origin_jet" not in report.blocking_failures()


def test_large_companion_fields():
    params = resolved._replace(N=2000)
    report = validate(build(InitialDataSpec(params, z_amplitude=1.0)), params)
    assert "companion_fields" in report.blocking_failures()


def test_shifted_profile_detected():
    with store.replaced("wbar", lambda y: wbar.original_impl()(y) + 0.5):
        report = validate(build(InitialDataSpec(resolved)), resolved)
    assert not report.passed("origin_jet")
    assert "origin_jet" in report.blocking_failures()


def test_cutoff_too_close():
    with pytest.raises(ConstructionError):
        build(InitialDataSpec(resolved, cutoff_scale=0.01, profile_radius=0.01))


def test_domain_too_small():
    with pytest.raises(ValueError):
        build(InitialDataSpec(resolved._replace(L=0.5)))


def test_decoupled_small_domain():
    params = ModelParams.create(L=0.2, N=4000, blowup_regime=False)
    spec = InitialDataSpec(params, cutoff_scale=0.04, profile_radius=0.04, decoupled=True)
    state = build(spec)
    assert state.w[params.N // 2] == pytest.approx(params.kappa0)
    assert np.all(state.w[np.abs(state.x_grid) >= 0.08] == params.kappa0)

    with pytest.raises(ValueError, match="domain half-width"):
        build(spec._replace(decoupled=False))
    with pytest.raises(ValueError, match="does not fit"):
        build(spec._replace(cutoff_scale=0.2))
