"""Margins of the bootstrap inequalities on self-similar snapshots.

Every inequality is evaluated on the sampled y-window of a snapshot and reported as a
:class:`Margin`, the worst ratio of observed value to bound (lower bounds are turned
into ratios of bound to observed value). A margin above ``1 + slack`` is a violation.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

from hpcblowup.burgers import wbar, wbar_deriv
from hpcblowup.model import ModelParams, background
from hpcblowup.modulation import ModulationState, SelfSimilarSnapshot

log = logging.getLogger(__name__)

SLACK = 0.01


class Margin(NamedTuple):
    cid: str
    t: float
    s: float
    y: float
    observed: float
    bound: float
    margin: float

    def violated(self, slack: float = SLACK) -> bool:
        return not self.margin <= 1 + slack


def _worst(
    cid: str,
    snapshot: SelfSimilarSnapshot,
    observed: np.ndarray,
    bound: np.ndarray | float,
    mask: np.ndarray | None = None,
) -> Margin | None:
    y = snapshot.y_grid
    observed = np.abs(np.broadcast_to(observed, y.shape))
    bound = np.broadcast_to(np.asarray(bound, dtype=float), y.shape)
    if mask is not None:
        y, observed, bound = y[mask], observed[mask], bound[mask]
    if y.size == 0:
        return None
    ratio = observed / bound
    i = int(np.argmax(ratio))
    return Margin(cid, snapshot.t, snapshot.s, float(y[i]), float(observed[i]), float(bound[i]), float(ratio[i]))


def _scalar(cid: str, snapshot: SelfSimilarSnapshot, observed: float, bound: float) -> Margin:
    observed = abs(float(observed))
    return Margin(cid, snapshot.t, snapshot.s, 0.0, observed, float(bound), observed / bound)


def _lower(cid: str, snapshot: SelfSimilarSnapshot, observed: np.ndarray, bound: float) -> Margin:
    observed = np.abs(np.broadcast_to(observed, snapshot.y_grid.shape))
    i = int(np.argmin(observed))
    return Margin(
        cid, snapshot.t, snapshot.s, float(snapshot.y_grid[i]), float(observed[i]), bound,
        bound / observed[i] if observed[i] > 0 else np.inf,
    )


def bootstrap_margins(
    snapshot: SelfSimilarSnapshot, mod: ModulationState, params: ModelParams
) -> list[Margin]:
    """Evaluate every bootstrap inequality on one snapshot."""
    ε, M, κ0, α = params.epsilon, params.M, params.kappa0, params.alpha
    s = snapshot.s
    y = snapshot.y_grid
    l = 1 / M
    weight = (1 + y**2) ** (1 / 3)
    decay = (1 + y**2) ** (-1 / 3)
    inner = np.abs(y) <= l
    middle = (np.abs(y) >= l) & (np.abs(y) <= np.exp(1.5 * s))
    outer = np.abs(y) >= np.exp(1.5 * s)
    amplitude = np.exp(-s / 2) * snapshot.W + mod.kappa
    jet = snapshot.at_origin()

    margins = [
        _scalar("modulation_rates.tau", snapshot, mod.tau_dot, 5 * M * np.exp(-s)),
        _scalar("modulation_rates.xi", snapshot, mod.xi_dot, 8 * M),
        _scalar("modulation_position.tau", snapshot, mod.tau - ε, 10 * M * ε**2),
        _scalar("modulation_position.xi", snapshot, mod.xi, 8 * M * ε),
        _scalar("transport_factor", snapshot, 1 / (1 - mod.tau_dot), 9 / 8),
        _lower("amplitude_window.lower", snapshot, amplitude, 0.75 * κ0),
        _worst("amplitude_window.upper", snapshot, amplitude, 1.25 * κ0),
        _lower("amplitude_kappa.lower", snapshot, mod.kappa, 0.75 * κ0),
        _scalar("amplitude_kappa.upper", snapshot, mod.kappa, 1.25 * κ0),
        _scalar("third_derivative_origin", snapshot, jet.W[3] - 6, 1.0),
        _worst(
            "second_derivative",
            snapshot,
            snapshot.dW[1],
            40 * np.abs(y) / np.sqrt(1 + y**2),
            mask=y != 0,
        ),
        _worst("high_derivatives.d3", snapshot, snapshot.dW[2], M**0.75),
        _worst("high_derivatives.d4", snapshot, snapshot.dW[3], M),
        _worst("z_bounds.d0", snapshot, snapshot.Z, 1 + 8 * M * ε),
    ]
    margins += [
        _worst(f"z_bounds.d{n}", snapshot, snapshot.dZ[n - 1], 2 * M * np.exp(-(7 - n) / 4 * s))
        for n in range(1, 5)
    ]
    margins += [
        _worst("phi_bounds.d1", snapshot, snapshot.dPhi[0], 2 * M * np.exp(-1.5 * s)),
        _worst("phi_bounds.d2", snapshot, snapshot.dPhi[1], M * np.exp(-3 * s)),
    ]
    margins += [
        _worst(f"phi_bounds.d{n}", snapshot, snapshot.dPhi[n - 1], 2 * np.exp(-1.5 * s))
        for n in range(3, 6)
    ]
    margins.append(_worst("slope_envelope", snapshot, snapshot.dW[0], (1 + ε ** (1 / 7)) * decay))

    # weighted perturbation in physical variables
    bg = background(params)
    x = mod.xi + y * np.exp(-1.5 * s)
    perturbation = np.max(
        np.abs(
            [
                snapshot.sigma - bg.rho_bar,
                snapshot.U,
                snapshot.Phi - bg.phi_bar,
                np.exp(1.5 * s) * snapshot.dPhi[0],
                np.exp(3 * s) * snapshot.dPhi[1],
            ]
        ),
        axis=0,
    )
    margins += [
        _worst("weighted_perturbation", snapshot, (1 + x**2) ** (1 / 3) * perturbation, np.sqrt(M)),
        _worst("weighted_phi.d1", snapshot, weight * snapshot.dPhi[0], np.sqrt(M) * np.exp(-s / 2)),
        _worst("weighted_phi.d2", snapshot, weight * snapshot.dPhi[1], np.sqrt(M) * np.exp(-2 * s)),
        _worst("z_slope_decay", snapshot, snapshot.dZ[0], decay),
    ]

    # perturbation of the profile
    deviation = [snapshot.W - wbar(y)] + [snapshot.dW[n - 1] - wbar_deriv(y, n) for n in range(1, 5)]
    margins += [
        _worst(f"perturbation_inner.d{n}", snapshot, deviation[n], 3 * ε**0.2 * l ** (4 - n), inner)
        for n in range(4)
    ]
    margins += [
        _worst("perturbation_inner.d4", snapshot, deviation[4], 2 * ε**0.2, inner),
        _worst(
            "perturbation_middle.d0", snapshot, deviation[0], ε ** (1 / 6) * (1 + y**2) ** (1 / 6), middle
        ),
        _worst("perturbation_middle.d1", snapshot, deviation[1], ε ** (1 / 7) * decay, middle),
        _worst("slope_outer", snapshot, snapshot.dW[0], decay, outer),
        _lower("density_bounds.lower", snapshot, snapshot.sigma, (α * κ0 / 16) ** (1 / α)),
        _worst("density_bounds.upper", snapshot, snapshot.sigma, (α * κ0) ** (1 / α)),
        _worst("amplitude_growth", snapshot, snapshot.W, M * np.exp(s / 2)),
    ]
    return [m for m in margins if m is not None]


def bootstrap_monitor(
    snapshot: SelfSimilarSnapshot,
    mod: ModulationState,
    params: ModelParams,
    slack: float = SLACK,
) -> list[Margin]:
    """Bootstrap inequalities violated by more than `slack`; empty when all hold."""
    if not params.blowup_regime:
        log.debug("bootstrap monitor on a configuration outside the blow-up regime")
    violations = [m for m in bootstrap_margins(snapshot, mod, params) if m.violated(slack)]
    for m in violations:
        log.debug("bootstrap violation %s at s=%.4g, y=%g: margin %.3g", m.cid, m.s, m.y, m.margin)
    return violations
