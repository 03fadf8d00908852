"""Self-similar frame of the forming singularity.

With the modulation variables :math:`\\tau(t), \\xi(t), \\kappa(t)` the fields are written as

.. math::

    y = \\frac{x - \\xi}{(\\tau - t)^{3/2}}, \\quad s = -\\ln(\\tau - t), \\quad
    w = e^{-s/2} W(y, s) + \\kappa, \\quad z = Z(y, s), \\quad \\phi = \\Phi(y, s),

and the frame is pinned by :math:`W(0) = 0`, :math:`\\partial_y W(0) = -1` and
:math:`\\partial^2_y W(0) = 0`. Two frames are available: the empirical one read off the
steepest point of ``w`` (:func:`extract_empirical`), and the one integrated from the
modulation equations alongside the solver (:class:`ModulationTracker`).
"""

from __future__ import annotations

import logging
from typing import Literal, NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from hpcblowup.model import ModelParams, PhysicalState, VacuumError
from hpcblowup.solver import RunTrace, locate_min_slope

log = logging.getLogger(__name__)

Velocities = Literal["W", "Z", "sigma", "U"]

#: minimal admissible |∂³_y W(0)| in the modulation equations
MIN_THIRD_DERIVATIVE = 0.5
#: nodes on each side of ξ used for the local splines
JET_HALF_WIDTH = 8


class NoFrameError(ValueError):
    """No self-similar frame exists, e.g. because ``w`` is nowhere decreasing."""


class IllConditionedError(RuntimeError):
    """The modulation equations are singular, ``|∂³_y W(0)|`` is too small."""


class WindowError(ValueError):
    """The requested self-similar window leaves the computational domain."""


class ModulationState(NamedTuple):
    """Modulation variables at physical time `t`."""

    t: float
    tau: float
    xi: float
    kappa: float
    s: float
    tau_dot: float = 0.0
    xi_dot: float = 0.0
    kappa_dot: float = 0.0

    @classmethod
    def at(
        cls,
        t: float,
        tau: float,
        xi: float,
        kappa: float,
        tau_dot: float = 0.0,
        xi_dot: float = 0.0,
        kappa_dot: float = 0.0,
    ) -> ModulationState:
        if not tau > t:
            msg = f"modulation time τ={tau:g} is not ahead of t={t:g}"
            raise NoFrameError(msg)
        return cls(t, tau, xi, kappa, -np.log(tau - t), tau_dot, xi_dot, kappa_dot)

    @classmethod
    def initial(cls, params: ModelParams) -> ModulationState:
        """``τ = ε``, ``ξ = 0``, ``κ = κ₀`` at ``t = 0``."""
        return cls.at(0.0, params.epsilon, 0.0, params.kappa0)

    @property
    def remaining(self) -> float:
        return self.tau - self.t


class ModulationSeries(NamedTuple):
    """Time series of a modulation frame."""

    t: np.ndarray
    s: np.ndarray
    tau: np.ndarray
    xi: np.ndarray
    kappa: np.ndarray
    tau_dot: np.ndarray
    xi_dot: np.ndarray
    kappa_dot: np.ndarray
    method: str = "empirical"

    @classmethod
    def from_states(cls, states: list[ModulationState], method: str) -> ModulationSeries:
        columns = np.array(states, dtype=float).reshape(-1, 8).T
        t, tau, xi, kappa, s, tau_dot, xi_dot, kappa_dot = columns
        return cls(t, s, tau, xi, kappa, tau_dot, xi_dot, kappa_dot, method)

    def __len__(self) -> int:
        return self.t.size

    def state_at(self, t: float) -> ModulationState:
        """Frame at time `t`, linearly interpolated between samples."""
        if self.t.size == 0 or not self.t[0] - 1e-14 <= t <= self.t[-1] + 1e-14:
            msg = f"t={t:g} outside the {self.method} modulation series"
            raise NoFrameError(msg)
        return ModulationState.at(
            t,
            *(
                float(np.interp(t, self.t, v))
                for v in (self.tau, self.xi, self.kappa, self.tau_dot, self.xi_dot, self.kappa_dot)
            ),
        )

    def table(self) -> tuple[list[str], np.ndarray]:
        names = ["t", "s", "tau", "xi", "kappa", "tau_dot", "xi_dot", "kappa_dot"]
        return names, np.column_stack([getattr(self, n) for n in names])


class FrameJet(NamedTuple):
    """y-derivatives at ``y = 0``: ``W[n]``, ``Z[n]`` for ``n <= 4``, ``Phi[n]`` for ``n <= 5``."""

    s: float
    W: np.ndarray
    Z: np.ndarray
    Phi: np.ndarray


class SelfSimilarSnapshot(NamedTuple):
    """Fields in self-similar variables.

    ``dW[n-1]`` holds :math:`\\partial^n_y W` for ``n = 1..4``, likewise ``dZ``; ``dPhi``
    goes up to order 5. ``sigma`` and ``U`` are the density and velocity,
    :math:`\\sigma^\\alpha/\\alpha = (e^{-s/2}W + \\kappa - Z)/2`.
    """

    s: float
    t: float
    y_grid: np.ndarray
    W: np.ndarray
    Z: np.ndarray
    Phi: np.ndarray
    sigma: np.ndarray
    U: np.ndarray
    dW: np.ndarray
    dZ: np.ndarray
    dPhi: np.ndarray

    def at_origin(self) -> FrameJet:
        def column(field, stack):
            return np.array([np.interp(0.0, self.y_grid, f) for f in (field, *stack)])

        return FrameJet(
            self.s, column(self.W, self.dW), column(self.Z, self.dZ), column(self.Phi, self.dPhi)
        )


class SelfSimilarSeries(NamedTuple):
    """Self-similar snapshots with their frames, ordered in ``s``."""

    frames: list[tuple[ModulationState, SelfSimilarSnapshot]]

    @property
    def s(self) -> np.ndarray:
        return np.array([snap.s for _, snap in self.frames])

    def __len__(self) -> int:
        return len(self.frames)


def extract_empirical(state: PhysicalState) -> ModulationState:
    """Empirical frame of a physical snapshot.

    ``ξ`` is the sub-grid minimum of ``w_x``, ``κ = w(ξ)`` and ``τ - t = -1/min w_x``,
    which is what the constraint ``∂_y W(0) = -1`` forces.

    Raises
    ------
    NoFrameError
        if ``w_x >= 0`` everywhere.
    """
    min_wx, xi = locate_min_slope(state.w, state.x_grid)
    if not min_wx < 0:
        msg = f"w is nowhere decreasing at t={state.t:g}"
        raise NoFrameError(msg)

    x = state.x_grid
    i = int(np.clip(np.searchsorted(x, xi), 3, x.size - 4))
    local = slice(i - 3, i + 4)
    kappa = float(CubicSpline(x[local], state.w[local])(xi))
    return ModulationState.at(state.t, state.t - 1 / min_wx, xi, kappa)


def empirical_series(trace: RunTrace) -> ModulationSeries:
    """Empirical frames of all snapshots, with rates from finite differences in ``t``."""
    states = []
    for snap in trace.snapshots:
        try:
            states.append(extract_empirical(snap))
        except NoFrameError as e:
            log.debug("skipping snapshot: %s", e)
    series = ModulationSeries.from_states(states, "empirical")
    if len(series) >= 2:
        # _replace relies on len() == number of fields, which __len__ overrides
        series = ModulationSeries(
            **{
                **series._asdict(),
                "tau_dot": np.gradient(series.tau, series.t),
                "xi_dot": np.gradient(series.xi, series.t),
                "kappa_dot": np.gradient(series.kappa, series.t),
            }
        )
    return series


def _local_derivatives(
    x: np.ndarray, f: np.ndarray, at: float, order: int, k: int
) -> np.ndarray:
    i = int(np.searchsorted(x, at))
    half = max(JET_HALF_WIDTH, k + 1)
    lo, hi = max(0, i - half), min(x.size, i + half + 1)
    spline = make_interp_spline(x[lo:hi], f[lo:hi], k=k)
    return np.array([float(spline(at, nu=n)) for n in range(order + 1)])


def frame_jet(state: PhysicalState, mod: ModulationState) -> FrameJet:
    """y-derivatives at ``y = 0`` from local quintic (``w``, ``z``) and septic (``phi``) splines."""
    s = mod.s
    x = state.x_grid
    dw = _local_derivatives(x, state.w, mod.xi, 4, 5)
    dz = _local_derivatives(x, state.z, mod.xi, 4, 5)
    dphi = _local_derivatives(x, state.phi, mod.xi, 5, 7)

    scale_w = np.exp(-1.5 * s * np.arange(5))
    scale_phi = np.exp(-1.5 * s * np.arange(6))
    W = np.exp(s / 2) * scale_w * dw
    W[0] = np.exp(s / 2) * (dw[0] - mod.kappa)
    return FrameJet(s, W, scale_w * dz, scale_phi * dphi)


def modulation_rates(
    jet: FrameJet, mod: ModulationState, params: ModelParams
) -> tuple[float, float]:
    """``(τ̇, ξ̇)`` from the modulation equations evaluated on a jet at ``y = 0``.

    .. math::

        \\dot\\tau = \\frac{\\beta e^{-s}}{1+\\alpha} + r e^{s/2} \\partial_y Z^0
            + \\frac{2 e^{-s/2}}{1+\\alpha}\\left(e^{3s/2}\\partial^2_y\\Phi^0
            - \\frac{\\beta}{2}\\partial_y Z^0\\right),

        \\dot\\xi = -(1-\\dot\\tau) e^{-s/2} \\frac{F^{(2)}}{\\partial^3_y W^0}
            + \\kappa + r Z^0 - \\frac{\\kappa_0}{1+\\alpha},

    with :math:`r = (1-\\alpha)/(1+\\alpha)` and

    .. math::

        F^{(2)} = \\frac{2 e^{-s/2}}{(1-\\dot\\tau)(1+\\alpha)}\\left(
            e^{3s/2}\\partial^3_y\\Phi^0 - \\frac{\\beta}{2}\\partial^2_y Z^0\\right)
            + \\frac{e^{s/2}(1-\\alpha)}{(1-\\dot\\tau)(1+\\alpha)}\\partial^2_y Z^0.

    Raises
    ------
    IllConditionedError
        if ``|∂³_y W(0)| < 0.5``.
    """
    α, β, κ0 = params.alpha, params.beta, params.kappa0
    s = jet.s
    r = (1 - α) / (1 + α)
    W3 = jet.W[3]
    if not abs(W3) >= MIN_THIRD_DERIVATIVE:
        msg = f"|∂³_y W(0)| = {abs(W3):.3g} at s={s:.4g}"
        raise IllConditionedError(msg)

    Z0, Z1, Z2 = jet.Z[:3]
    tau_dot = (
        β * np.exp(-s) / (1 + α)
        + r * np.exp(s / 2) * Z1
        + np.exp(-s / 2) * 2 / (1 + α) * (np.exp(1.5 * s) * jet.Phi[2] - β * Z1 / 2)
    )
    lag = 1 - tau_dot
    force = 2 * np.exp(-s / 2) / (lag * (1 + α)) * (
        np.exp(1.5 * s) * jet.Phi[3] - β / 2 * Z2
    ) + np.exp(s / 2) * (1 - α) / (lag * (1 + α)) * Z2
    xi_dot = -lag * np.exp(-s / 2) * force / W3 + mod.kappa + r * Z0 - κ0 / (1 + α)
    return float(tau_dot), float(xi_dot)


def modulation_rhs(
    snapshot: SelfSimilarSnapshot, mod: ModulationState, params: ModelParams
) -> tuple[float, float]:
    """``(τ̇, ξ̇)`` from the derivative stacks of a self-similar snapshot."""
    return modulation_rates(snapshot.at_origin(), mod, params)


class ModulationTracker:
    """Integrate ``(τ, ξ)`` from the modulation equations during a run.

    Instances are solver observers (see :func:`.solver.run_until_blowup`). Each step is
    a Heun step between the old and the new physical state, and ``κ = w(ξ)`` is read off
    the new state. Once the frame is lost (``τ <= t`` or singular equations) the
    tracker stops and records the reason.
    """

    def __init__(self, params: ModelParams, initial: ModulationState | None = None):
        self.params = params
        self.states = [initial or ModulationState.initial(params)]
        self.lost = False
        self.reason = ""

    @property
    def current(self) -> ModulationState:
        return self.states[-1]

    def _rates(self, state: PhysicalState, mod: ModulationState) -> tuple[float, float]:
        return modulation_rates(frame_jet(state, mod), mod, self.params)

    def _kappa(self, state: PhysicalState, xi: float) -> float:
        return float(_local_derivatives(state.x_grid, state.w, xi, 0, 3)[0])

    def __call__(self, old: PhysicalState, new: PhysicalState, dt: float) -> None:
        if self.lost:
            return
        mod = self.current
        try:
            tau_dot, xi_dot = self._rates(old, mod)
            mod = mod._replace(tau_dot=tau_dot, xi_dot=xi_dot)
            self.states[-1] = mod

            tau_p = mod.tau + dt * tau_dot
            xi_p = mod.xi + dt * xi_dot
            predicted = ModulationState.at(new.t, tau_p, xi_p, self._kappa(new, xi_p))
            tau_dot_p, xi_dot_p = self._rates(new, predicted)

            tau = mod.tau + dt / 2 * (tau_dot + tau_dot_p)
            xi = mod.xi + dt / 2 * (xi_dot + xi_dot_p)
            kappa = self._kappa(new, xi)
            self.states.append(
                ModulationState.at(
                    new.t, tau, xi, kappa, tau_dot_p, xi_dot_p, (kappa - mod.kappa) / dt
                )
            )
        except (NoFrameError, IllConditionedError) as e:
            self.lost = True
            self.reason = str(e)
            log.warning("modulation frame lost at t=%g: %s", new.t, e)

    def series(self) -> ModulationSeries:
        return ModulationSeries.from_states(self.states, "ode")


class FrameGap(NamedTuple):
    t: np.ndarray
    tau_gap: np.ndarray
    xi_gap: np.ndarray
    max_tau_gap: float
    max_xi_gap: float


def compare_frames(empirical: ModulationSeries, ode: ModulationSeries) -> FrameGap:
    """Gap between two frames on the empirical sample times both series cover."""
    keep = (empirical.t >= ode.t[0]) & (empirical.t <= ode.t[-1])
    t = empirical.t[keep]
    tau_gap = empirical.tau[keep] - np.interp(t, ode.t, ode.tau)
    xi_gap = empirical.xi[keep] - np.interp(t, ode.t, ode.xi)
    return FrameGap(
        t=t,
        tau_gap=tau_gap,
        xi_gap=xi_gap,
        max_tau_gap=float(np.abs(tau_gap).max()) if t.size else np.nan,
        max_xi_gap=float(np.abs(xi_gap).max()) if t.size else np.nan,
    )


def selfsimilar_grid(y_window: float, core: float = 10.0, n_core: int = 801, n_tail: int = 400):
    """Symmetric y-grid: uniform on ``|y| <= core``, geometric out to `y_window`."""
    core = min(core, y_window)
    inner = np.linspace(-core, core, n_core)
    if y_window <= core:
        return inner
    tail = np.geomspace(core, y_window, n_tail)[1:]
    return np.concatenate([-tail[::-1], inner, tail])


def max_window(state: PhysicalState, mod: ModulationState) -> float:
    """Largest `y_window` that maps inside the computational domain."""
    x = state.x_grid
    return min(mod.xi - x[0], x[-1] - mod.xi) * np.exp(1.5 * mod.s)


def to_selfsimilar(
    state: PhysicalState,
    mod: ModulationState | None,
    y_window: float,
    params: ModelParams,
) -> SelfSimilarSnapshot:
    """Sample a physical snapshot in self-similar variables.

    Values and y-derivatives come from global interpolating splines of the x-grid
    (quintic for ``w`` and ``z``, septic for ``phi``) and the chain rule
    ``∂_y = e^{-3s/2} ∂_x``. Without `mod` the empirical frame is used.

    Raises
    ------
    NoFrameError
        if no frame can be extracted.
    WindowError
        if ``[-y_window, y_window]`` maps outside the domain.
    """
    if mod is None:
        mod = extract_empirical(state)
    s = mod.s
    if y_window > max_window(state, mod) * (1 + 1e-12):
        msg = (
            f"y_window={y_window:g} leaves the domain at s={s:.4g}, "
            f"at most {max_window(state, mod):.4g} fits"
        )
        raise WindowError(msg)

    y = selfsimilar_grid(y_window)
    x = np.clip(mod.xi + y * np.exp(-1.5 * s), state.x_grid[0], state.x_grid[-1])

    w_spline = make_interp_spline(state.x_grid, state.w, k=5)
    z_spline = make_interp_spline(state.x_grid, state.z, k=5)
    phi_spline = make_interp_spline(state.x_grid, state.phi, k=7)

    def stack(spline, order):
        return np.array([np.exp(-1.5 * n * s) * spline(x, nu=n) for n in range(1, order + 1)])

    w = w_spline(x)
    z = z_spline(x)
    W = np.exp(s / 2) * (w - mod.kappa)

    q = (w - z) / 2
    if np.any(q <= 0):
        msg = f"vacuum inside the self-similar window at s={s:.4g}"
        raise VacuumError(msg)

    return SelfSimilarSnapshot(
        s=s,
        t=state.t,
        y_grid=y,
        W=W,
        Z=z,
        Phi=phi_spline(x),
        sigma=(params.alpha * q) ** (1 / params.alpha),
        U=(w + z - params.kappa0) / 2,
        dW=np.exp(s / 2) * stack(w_spline, 4),
        dZ=stack(z_spline, 4),
        dPhi=stack(phi_spline, 5),
    )


def selfsimilar_series(
    trace: RunTrace,
    series: ModulationSeries,
    y_window: float,
    params: ModelParams,
) -> SelfSimilarSeries:
    """Self-similar snapshots of a run in the frame `series`.

    The window of each snapshot is clipped to what fits in the domain at its ``s``.
    Snapshots outside the frame's time range, and snapshots that cannot be
    transformed, are skipped.
    """
    frames = []
    for state in trace.snapshots:
        try:
            mod = series.state_at(state.t)
        except NoFrameError as e:
            log.debug("no %s frame for snapshot at t=%g: %s", series.method, state.t, e)
            continue
        window = min(y_window, max_window(state, mod) * (1 - 1e-9))
        if window < y_window:
            log.debug("clipping y window to %g at s=%.4g", window, mod.s)
        try:
            frames.append((mod, to_selfsimilar(state, mod, window, params)))
        except (WindowError, VacuumError) as e:
            log.warning("skipping snapshot at t=%g: %s", state.t, e)
    frames.sort(key=lambda pair: pair[1].s)
    return SelfSimilarSeries(frames)


def constraint_residuals(snapshot: SelfSimilarSnapshot) -> tuple[float, float, float]:
    """``(W(0), ∂_y W(0) + 1, ∂²_y W(0))``, all zero in an exact frame."""
    jet = snapshot.at_origin()
    return float(jet.W[0]), float(jet.W[1] + 1), float(jet.W[2])


def physical_field(snapshot: SelfSimilarSnapshot, mod: ModulationState):
    """Map a snapshot back to ``(x, w)`` with ``w = e^{-s/2} W + κ``."""
    x = mod.xi + snapshot.y_grid * np.exp(-1.5 * snapshot.s)
    return x, np.exp(-snapshot.s / 2) * snapshot.W + mod.kappa


class Symbols(NamedTuple):
    """Transport and forcing terms of the self-similar ``W`` and ``Z`` equations."""

    G_W: np.ndarray
    G_Z: np.ndarray
    F_W: np.ndarray
    F_Z: np.ndarray


def transport_symbols(
    snapshot: SelfSimilarSnapshot, mod: ModulationState, params: ModelParams
) -> Symbols:
    α, β, κ0 = params.alpha, params.beta, params.kappa0
    s = snapshot.s
    r = (1 - α) / (1 + α)
    lag = 1 - mod.tau_dot
    shift = κ0 / (1 + α)
    phi_y = np.exp(1.5 * s) * snapshot.dPhi[0]

    G_W = np.exp(s / 2) / lag * (mod.kappa + r * snapshot.Z - mod.xi_dot - shift)
    G_Z = np.exp(s / 2) / lag * (r * mod.kappa - mod.xi_dot - shift) + r * snapshot.W / lag
    F_W = (
        np.exp(-s / 2)
        / lag
        * (
            2 / (1 + α) * (phi_y + β * κ0 / 2 - β / 2 * snapshot.Z)
            - mod.kappa_dot
            - β * mod.kappa / (1 + α)
        )
    )
    F_Z = (
        2
        * np.exp(-s)
        / (lag * (1 + α))
        * (phi_y + β * κ0 / 2 - β * (np.exp(-s / 2) * snapshot.W + mod.kappa) / 2)
    )
    return Symbols(G_W, G_Z, F_W, F_Z)


def transport_velocity(
    snapshot: SelfSimilarSnapshot,
    mod: ModulationState,
    params: ModelParams,
    kind: Velocities,
) -> np.ndarray:
    """Self-similar transport velocity of ``W``, ``Z``, ``sigma`` or ``U`` on the y-grid."""
    s = snapshot.s
    y = snapshot.y_grid
    lag = 1 - mod.tau_dot
    if kind == "W":
        return transport_symbols(snapshot, mod, params).G_W + 1.5 * y + snapshot.W / lag
    if kind == "Z":
        G_Z = transport_symbols(snapshot, mod, params).G_Z
        return G_Z + 1.5 * y + np.exp(s / 2) * snapshot.Z / lag
    # density and velocity move with rate·u in the model clock
    c = params.rate
    v_sigma = np.exp(s / 2) * (c * snapshot.U - mod.xi_dot) / lag + 1.5 * y
    if kind == "sigma":
        return v_sigma
    if kind == "U":
        return v_sigma + np.exp(s / 2) * c * snapshot.sigma**params.alpha / lag
    msg = f"Unknown transport velocity {kind}"
    raise ValueError(msg)


def damping(
    snapshot: SelfSimilarSnapshot,
    mod: ModulationState,
    params: ModelParams,
    kind: Literal["sigma", "U"],
) -> np.ndarray:
    """Damping coefficients of the self-similar density and velocity equations."""
    lag = 1 - mod.tau_dot
    if kind == "sigma":
        return params.rate * (snapshot.dW[0] + np.exp(snapshot.s / 2) * snapshot.dZ[0]) / (2 * lag)
    if kind == "U":
        return np.full_like(snapshot.y_grid, params.rate * params.beta * np.exp(-snapshot.s) / lag)
    msg = f"Unknown damping {kind}"
    raise ValueError(msg)
