"""Method-of-lines evolution of the Riemann-variable system up to gradient blow-up.

In the rescaled clock the system reads

.. math::

    w_t + \\lambda_w w_x &= \\frac{2}{1+\\alpha}\\phi_x + \\frac{\\beta}{1+\\alpha}(\\kappa_0 - w - z), \\\\
    z_t + \\lambda_z z_x &= \\frac{2}{1+\\alpha}\\phi_x + \\frac{\\beta}{1+\\alpha}(\\kappa_0 - w - z), \\\\
    \\phi_t &= D \\phi_{xx} - \\lambda \\phi + S(q),

with the speeds of :func:`.model.transport_speeds`. ``w`` and ``z`` are advanced with
the third-order SSP Runge-Kutta scheme. Each stage takes its chemotactic forcing from
``phi`` predicted at the stage time; ``phi`` itself follows with a Crank-Nicolson step
or with one step of the exact heat semigroup.
"""

from __future__ import annotations

import logging
from typing import Callable, Literal, NamedTuple

import numpy as np
import scipy.linalg

from hpcblowup.heat_kernel import duhamel_step
from hpcblowup.model import (
    ModelParams,
    PhysicalState,
    VacuumError,
    chemo_source,
    primitive_from_riemann,
    transport_speeds,
)
from hpcblowup.transport import (
    GHOST,
    TransportSchemes,
    central_derivative,
    upwind_derivative,
)

log = logging.getLogger(__name__)

PhiMethods = Literal["imex-central", "duhamel"]
Couplings = Literal["full", "burgers-test"]
StopReasons = Literal["slope-threshold", "t-limit", "instability"]

#: blow-up proximity control, dt <= PROXIMITY / |min w_x|
PROXIMITY = 0.2

#: grid cells across the steep core ``|min w_x|^{-3/2}`` at the default stop
CORE_CELLS = 4


class InstabilityError(RuntimeError):
    """Non-finite values appeared in the solution."""


class SolverConfig(NamedTuple):
    """Scheme selection and run control.

    Attributes
    ----------
    params
        model parameters.
    phi_method
        ``imex-central`` (Crank-Nicolson) or ``duhamel`` (exact semigroup step).
    transport_scheme
        ``weno5`` or ``upwind2``.
    coupling
        ``full`` or ``burgers-test``, which drops the chemotactic feedback, the damping
        and the ``z`` dynamics.
    stop_slope
        stop once ``min w_x <= -stop_slope``. ``None`` stops while the steep core
        still spans :data:`CORE_CELLS` cells, see :attr:`stop_threshold`.
    snapshot_stride
        steps between stored snapshots.
    t_limit_factor
        the run stops at ``t = t_limit_factor · epsilon``.
    speed_floor
        lower bound of the transport speed in the CFL condition.
    """

    params: ModelParams
    phi_method: PhiMethods = "imex-central"
    transport_scheme: TransportSchemes = "weno5"
    coupling: Couplings = "full"
    stop_slope: float | None = None
    snapshot_stride: int = 50
    t_limit_factor: float = 2.0
    speed_floor: float = 1e-8

    @property
    def stop_threshold(self) -> float:
        """Slope at which the run stops.

        The core of a forming cusp has width ``|min w_x|^{-3/2}``, so a grid resolves
        slopes up to about ``dx^{-2/3}`` before the shock. The default
        ``(CORE_CELLS·dx)^{-2/3}`` stays below that and below ``0.2/dx``.
        """
        if self.stop_slope is not None:
            return self.stop_slope
        dx = self.params.dx
        return min(0.2 / dx, (CORE_CELLS * dx) ** (-2 / 3))

    def validate(self) -> SolverConfig:
        if self.stop_threshold <= 0:
            msg = "stop_slope must be positive"
            raise ValueError(msg)
        if self.stop_threshold > 0.5 / self.params.dx:
            msg = (
                f"stop_slope={self.stop_threshold:g} exceeds 0.5/dx="
                f"{0.5 / self.params.dx:g}, the cusp would be under-resolved"
            )
            raise ValueError(msg)
        if self.snapshot_stride < 1:
            msg = "snapshot_stride must be at least 1"
            raise ValueError(msg)
        return self


class SlopeSeries(NamedTuple):
    t: np.ndarray
    min_wx: np.ndarray
    argmin_x: np.ndarray


class NormSeries(NamedTuple):
    """Sup norms recorded every step."""

    t: np.ndarray
    qx: np.ndarray
    ux: np.ndarray
    zx: np.ndarray
    phixx: np.ndarray


class RunTrace(NamedTuple):
    snapshots: list[PhysicalState]
    slope_series: SlopeSeries
    norm_series: NormSeries
    stop_reason: StopReasons
    params: ModelParams
    steps: int
    error: str = ""

    @property
    def dx(self) -> float:
        return self.params.dx

    @property
    def final(self) -> PhysicalState:
        return self.snapshots[-1]


def slope_field(w: np.ndarray, dx: float) -> np.ndarray:
    """``w_x`` by fourth-order central differences."""
    return central_derivative(w, dx)


def locate_min_slope(w: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Sub-grid minimum of ``w_x`` from a parabola through the three lowest nodes."""
    dx = x[1] - x[0]
    slope = slope_field(w, dx)
    i = int(np.argmin(slope))
    if 0 < i < slope.size - 1:
        left, mid, right = slope[i - 1], slope[i], slope[i + 1]
        curvature = left - 2 * mid + right
        if curvature > 0:
            shift = 0.5 * (left - right) / curvature
            return float(mid - 0.25 * (left - right) * shift), float(x[i] + shift * dx)
    return float(slope[i]), float(x[i])


def _transport(
    w: np.ndarray,
    z: np.ndarray,
    forcing: np.ndarray | None,
    config: SolverConfig,
) -> tuple[np.ndarray, np.ndarray]:
    params = config.params
    dx = params.dx

    if config.coupling == "burgers-test":
        speed = w - params.kappa0 / (1 + params.alpha)
        dw = -speed * upwind_derivative(w, speed, dx, config.transport_scheme)
        dz = np.zeros_like(z)
    else:
        # positivity of the density
        primitive_from_riemann(w, z, params)
        a_w, a_z = transport_speeds(w, z, params)
        damping = params.beta / (1 + params.alpha) * (params.kappa0 - w - z)
        dw = -a_w * upwind_derivative(w, a_w, dx, config.transport_scheme)
        dw += forcing + damping
        dz = -a_z * upwind_derivative(z, a_z, dx, config.transport_scheme)
        dz += forcing + damping

    dw[:GHOST] = dw[-GHOST:] = 0
    dz[:GHOST] = dz[-GHOST:] = 0
    return dw, dz


def _chemotactic_forcing(phi: np.ndarray, config: SolverConfig) -> np.ndarray:
    params = config.params
    return 2 / (1 + params.alpha) * central_derivative(phi, params.dx)


def rhs(
    state: PhysicalState, config: SolverConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives of ``(w, z, phi)``.

    The ``phi`` derivative is evaluated with central differences, also when the step
    itself treats diffusion implicitly. In ``burgers-test`` coupling only ``w`` moves.

    Raises
    ------
    VacuumError
        if ``w <= z`` somewhere.
    """
    params = config.params
    if config.coupling == "burgers-test":
        dw, dz = _transport(state.w, state.z, None, config)
        return dw, dz, np.zeros_like(state.phi)

    forcing = _chemotactic_forcing(state.phi, config)
    dw, dz = _transport(state.w, state.z, forcing, config)
    q = (state.w - state.z) / 2
    dphi = (
        params.rate * central_derivative(state.phi, params.dx, order=2)
        - params.rate * state.phi
        + chemo_source(q, params)
    )
    dphi[:GHOST] = dphi[-GHOST:] = 0
    return dw, dz, dphi


def cfl_dt(state: PhysicalState, config: SolverConfig) -> float:
    """Admissible time step.

    ``cfl·dx/max(speed, floor)``, further limited to ``0.2/|min w_x|`` so the step
    shrinks with the distance to blow-up.
    """
    params = config.params
    if config.coupling == "burgers-test":
        speed = np.abs(state.w - params.kappa0 / (1 + params.alpha)).max()
    else:
        a_w, a_z = transport_speeds(state.w, state.z, params)
        speed = max(np.abs(a_w).max(), np.abs(a_z).max())

    dt = params.cfl * params.dx / max(speed, config.speed_floor)
    min_slope = central_derivative(state.w, params.dx).min()
    if min_slope < 0:
        dt = min(dt, PROXIMITY / abs(min_slope))
    return float(dt)


def imex_phi_step(
    phi: np.ndarray,
    q_old: np.ndarray,
    q_new: np.ndarray,
    dt: float,
    params: ModelParams,
) -> np.ndarray:
    """Crank-Nicolson step for diffusion and decay with a trapezoid source.

    The two boundary values are held fixed.
    """
    n = phi.size
    D = params.rate
    r = dt * D / (2 * params.dx**2)
    h = dt * params.rate / 2

    lap = np.zeros_like(phi)
    lap[1:-1] = phi[2:] - 2 * phi[1:-1] + phi[:-2]
    source = chemo_source(q_old, params) + chemo_source(q_new, params)
    b = phi + r * lap - h * phi + dt / 2 * source
    b[0], b[-1] = phi[0], phi[-1]

    ab = np.zeros((3, n))
    ab[0, 2:] = -r
    ab[1, :] = 1 + 2 * r + h
    ab[2, :-2] = -r
    ab[1, 0] = ab[1, -1] = 1
    return scipy.linalg.solve_banded((1, 1), ab, b)


def _phi_step(
    phi: np.ndarray,
    q_old: np.ndarray,
    q_new: np.ndarray,
    dt: float,
    config: SolverConfig,
) -> np.ndarray:
    params = config.params
    if config.phi_method == "imex-central":
        phi_new = imex_phi_step(phi, q_old, q_new, dt, params)
    elif config.phi_method == "duhamel":
        phi_new = duhamel_step(
            phi,
            chemo_source(q_old, params),
            chemo_source(q_new, params),
            dt,
            params,
            params.dx,
        )
        phi_new[:GHOST] = phi[:GHOST]
        phi_new[-GHOST:] = phi[-GHOST:]
    else:
        msg = f"Unknown phi method {config.phi_method}"
        raise ValueError(msg)
    return phi_new


def _density(w: np.ndarray, z: np.ndarray, params: ModelParams) -> np.ndarray:
    return primitive_from_riemann(w, z, params)[2]


def step(state: PhysicalState, dt: float, config: SolverConfig) -> PhysicalState:
    """Advance all fields by `dt`.

    The three Runge-Kutta stages sit at ``t``, ``t + dt`` and ``t + dt/2``. Their
    chemotactic forcing uses ``phi`` stepped to the stage time with the stage value
    of ``q`` as the new source, which keeps the coupling third order in time.

    Raises
    ------
    InstabilityError
        on non-finite values.
    VacuumError
        if the density would vanish.
    """
    params = config.params
    w, z, phi = state.w, state.z, state.phi
    coupled = config.coupling == "full"

    def forcing(phi_stage: np.ndarray) -> np.ndarray | None:
        return _chemotactic_forcing(phi_stage, config) if coupled else None

    # Shu-Osher form of SSPRK3
    q_old = _density(w, z, params) if coupled else None
    dw, dz = _transport(w, z, forcing(phi), config)
    w1, z1 = w + dt * dw, z + dt * dz

    phi1 = _phi_step(phi, q_old, _density(w1, z1, params), dt, config) if coupled else phi
    dw, dz = _transport(w1, z1, forcing(phi1), config)
    w2 = 0.75 * w + 0.25 * (w1 + dt * dw)
    z2 = 0.75 * z + 0.25 * (z1 + dt * dz)

    phi2 = _phi_step(phi, q_old, _density(w2, z2, params), dt / 2, config) if coupled else phi
    dw, dz = _transport(w2, z2, forcing(phi2), config)
    w_new = w / 3 + 2 / 3 * (w2 + dt * dw)
    z_new = z / 3 + 2 / 3 * (z2 + dt * dz)

    if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(z_new))):
        msg = f"non-finite values at t={state.t + dt:g}"
        raise InstabilityError(msg)

    phi_new = phi
    if coupled:
        phi_new = _phi_step(phi, q_old, _density(w_new, z_new, params), dt, config)
        if not np.all(np.isfinite(phi_new)):
            msg = f"non-finite chemoattractant at t={state.t + dt:g}"
            raise InstabilityError(msg)

    return state.evolve(state.t + dt, w_new, z_new, phi_new, params)


def _norms(state: PhysicalState, dx: float) -> tuple[float, float, float, float]:
    wx = central_derivative(state.w, dx)
    zx = central_derivative(state.z, dx)
    return (
        float(np.abs(wx - zx).max() / 2),
        float(np.abs(wx + zx).max() / 2),
        float(np.abs(zx).max()),
        float(np.abs(central_derivative(state.phi, dx, order=2)).max()),
    )


def run_until_blowup(
    initial: PhysicalState,
    config: SolverConfig,
    observer: Callable[[PhysicalState, PhysicalState, float], None] | None = None,
) -> RunTrace:
    """Integrate until the slope threshold, the time limit or an instability.

    Parameters
    ----------
    initial
        validated initial data.
    config
        solver configuration.
    observer
        called as ``observer(old_state, new_state, dt)`` after every step.
    """
    config = config.validate()
    params = config.params
    dx = params.dx
    threshold = config.stop_threshold
    t_limit = config.t_limit_factor * params.epsilon

    state = initial
    snapshots = [state]
    slope_t, slope_min, slope_x = [], [], []
    norms = []

    def record(s: PhysicalState) -> float:
        min_wx, where = locate_min_slope(s.w, s.x_grid)
        slope_t.append(s.t)
        slope_min.append(min_wx)
        slope_x.append(where)
        norms.append(_norms(s, dx))
        return min_wx

    min_wx = record(state)
    steps = 0
    stop_reason = "t-limit"
    error = ""
    log.info(
        "starting run: coupling=%s, stop slope %g, t limit %g", config.coupling, threshold, t_limit
    )

    while True:
        if min_wx <= -threshold:
            stop_reason = "slope-threshold"
            break
        if state.t >= t_limit * (1 - 1e-12):
            stop_reason = "t-limit"
            break

        dt = min(cfl_dt(state, config), t_limit - state.t)
        try:
            new_state = step(state, dt, config)
        except (InstabilityError, VacuumError) as exc:
            log.error("run aborted at t=%g: %s", state.t, exc)
            stop_reason = "instability"
            error = str(exc)
            break

        min_wx = record(new_state)
        if observer is not None:
            observer(state, new_state, dt)
        state = new_state
        steps += 1
        if steps % config.snapshot_stride == 0:
            snapshots.append(state)

    if snapshots[-1] is not state:
        snapshots.append(state)

    norms = np.array(norms).reshape(-1, 4)
    times = np.array(slope_t)
    log.info(
        "run stopped (%s) after %d steps at t=%g, min w_x=%g",
        stop_reason,
        steps,
        state.t,
        slope_min[-1],
    )
    return RunTrace(
        snapshots=snapshots,
        slope_series=SlopeSeries(times, np.array(slope_min), np.array(slope_x)),
        norm_series=NormSeries(times, *norms.T),
        stop_reason=stop_reason,
        params=params,
        steps=steps,
        error=error,
    )


def t_star_extrapolated(trace: RunTrace) -> float:
    """Characteristic extrapolation ``t_stop + 1/|min w_x(t_stop)|``."""
    return float(trace.slope_series.t[-1] + 1 / abs(trace.slope_series.min_wx[-1]))
