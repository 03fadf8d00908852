from __future__ import annotations

import numpy as np
import pytest

from hpcblowup.bootstrap import Margin, bootstrap_margins, bootstrap_monitor
from hpcblowup.burgers import wbar, wbar_deriv
from hpcblowup.model import ModelParams, background
from hpcblowup.modulation import ModulationState, SelfSimilarSnapshot, selfsimilar_grid

S = 5.0


@pytest.fixture(scope="module")
def params():
    return ModelParams.create(epsilon=0.01, M=12.0)


@pytest.fixture(scope="module")
def frame(params):
    """The stable profile at ``s = 5`` on the equilibrium background."""
    tau = params.epsilon
    mod = ModulationState.at(tau - np.exp(-S), tau, 0.0, params.kappa0, xi_dot=5.0)
    y = selfsimilar_grid(1000)
    bg = background(params)
    snapshot = SelfSimilarSnapshot(
        s=mod.s,
        t=mod.t,
        y_grid=y,
        W=wbar(y),
        Z=np.zeros_like(y),
        Phi=np.full_like(y, bg.phi_bar),
        sigma=np.full_like(y, bg.rho_bar),
        U=np.zeros_like(y),
        dW=np.array([wbar_deriv(y, n) for n in range(1, 5)]),
        dZ=np.zeros((4, y.size)),
        dPhi=np.zeros((5, y.size)),
    )
    return mod, snapshot


def test_margin_violated():
    m = Margin("x", 0.0, 1.0, 0.0, 1.005, 1.0, 1.005)
    assert not m.violated()
    assert m.violated(slack=0.001)
    assert Margin("x", 0.0, 1.0, 0.0, np.nan, 1.0, np.nan).violated()


def test_margins_of_stable_profile(frame, params):
    mod, snapshot = frame
    margins = {m.cid: m for m in bootstrap_margins(snapshot, mod, params)}

    assert len(margins) == len(bootstrap_margins(snapshot, mod, params))
    assert margins["third_derivative_origin"].margin == pytest.approx(0, abs=1e-9)
    assert margins["transport_factor"].margin == pytest.approx(8 / 9)
    assert margins["high_derivatives.d3"].margin == pytest.approx(6 / 12**0.75, rel=1e-6)
    assert margins["high_derivatives.d3"].y == pytest.approx(0)
    assert margins["perturbation_inner.d1"].margin == pytest.approx(0, abs=1e-12)
    assert margins["z_bounds.d0"].margin == 0
    # |y| >= e^{3s/2} lies outside the sampled window
    assert "slope_outer" not in margins


def test_monitor_flags_only_fourth_derivative(frame, params):
    # |∂⁴_y W| of the stable profile peaks near 29.8, above M = 12
    mod, snapshot = frame
    violations = bootstrap_monitor(snapshot, mod, params)
    assert [m.cid for m in violations] == ["high_derivatives.d4"]
    assert violations[0].observed == pytest.approx(29.8, abs=0.2)


def test_monitor_flags_perturbations(frame, params):
    mod, snapshot = frame
    disturbed = snapshot._replace(Z=np.full_like(snapshot.Z, 3.0))
    lagging = mod._replace(tau_dot=0.2)
    cids = {m.cid for m in bootstrap_monitor(disturbed, lagging, params)}
    assert {"z_bounds.d0", "transport_factor", "high_derivatives.d4"} <= cids
    assert "modulation_rates.tau" not in cids

    thin = snapshot._replace(sigma=np.full_like(snapshot.sigma, 0.1))
    cids = {m.cid for m in bootstrap_monitor(thin, mod, params)}
    assert "density_bounds.lower" in cids
