"""Particle trajectories of the self-similar transport velocities.

A trajectory solves :math:`\\partial_s \\psi = \\mathcal{V}(\\psi, s)` with the velocity
interpolated linearly in ``y`` on each snapshot and linearly in ``s`` between snapshots.
"""

from __future__ import annotations

import logging
from typing import Callable, NamedTuple

import numpy as np
import scipy.integrate

from hpcblowup.model import ModelParams, transport_speeds
from hpcblowup.modulation import (
    ModulationState,
    SelfSimilarSeries,
    SelfSimilarSnapshot,
    Velocities,
    WindowError,
    empirical_series,
    selfsimilar_series,
    transport_velocity,
)
from hpcblowup.solver import RunTrace, slope_field

log = logging.getLogger(__name__)

#: rate of the far-field lower bound used for tail estimates
TAIL_RATE = 9 / 8


class TrajectoryPath(NamedTuple):
    """Sampled trajectory.

    ``exited`` is set when the path left the sampled window before `s1`; the path is
    then truncated at the exit point.
    """

    velocity: str
    y0: float
    s0: float
    s: np.ndarray
    psi: np.ndarray
    exited: bool


class BoundCheck(NamedTuple):
    passed: bool
    worst_ratio: float


class DecayIntegral(NamedTuple):
    total: float
    tail: float
    tail_fraction: float


class SampledField:
    """Field sampled on a sequence of y-grids, evaluated at arbitrary ``(s, y)``."""

    def __init__(self, s: np.ndarray, grids: list[np.ndarray], values: list[np.ndarray]):
        if len(s) < 2:
            msg = "need at least two snapshots to interpolate in s"
            raise ValueError(msg)
        self.s = np.asarray(s, dtype=float)
        self.grids = grids
        self.values = values
        self.lower = np.array([g[0] for g in grids])
        self.upper = np.array([g[-1] for g in grids])

    @classmethod
    def from_series(
        cls,
        series: SelfSimilarSeries,
        fn: Callable[[SelfSimilarSnapshot, ModulationState], np.ndarray],
    ) -> SampledField:
        return cls(
            series.s,
            [snap.y_grid for _, snap in series.frames],
            [fn(snap, mod) for mod, snap in series.frames],
        )

    def window(self, s: float) -> tuple[float, float]:
        return float(np.interp(s, self.s, self.lower)), float(np.interp(s, self.s, self.upper))

    def __call__(self, s: float, y: float) -> float:
        k = int(np.clip(np.searchsorted(self.s, s) - 1, 0, self.s.size - 2))
        frac = (s - self.s[k]) / (self.s[k + 1] - self.s[k])
        left = np.interp(y, self.grids[k], self.values[k])
        right = np.interp(y, self.grids[k + 1], self.values[k + 1])
        return float((1 - frac) * left + frac * right)


def _as_series(
    source: RunTrace | SelfSimilarSeries, params: ModelParams | None, y_window: float
) -> tuple[SelfSimilarSeries, ModelParams]:
    if isinstance(source, SelfSimilarSeries):
        if params is None:
            msg = "params are required with a self-similar series"
            raise ValueError(msg)
        return source, params
    params = params or source.params
    return selfsimilar_series(source, empirical_series(source), y_window, params), params


def integrate_trajectory(
    velocity: Velocities,
    y0: float,
    s0: float,
    s1: float,
    trace: RunTrace | SelfSimilarSeries,
    params: ModelParams | None = None,
    y_window: float = 1e3,
    samples: int = 400,
) -> TrajectoryPath:
    """Integrate ``∂_s ψ = V(ψ, s)`` from ``ψ(s0) = y0`` to `s1`.

    Parameters
    ----------
    velocity
        which transport velocity to follow.
    trace
        a finished run (transformed with its empirical frame and `y_window`) or an
        already transformed series.
    samples
        number of samples of the returned path.

    Raises
    ------
    ValueError
        if ``[s0, s1]`` is not covered by the snapshots.
    WindowError
        if `y0` lies outside the window at `s0`.
    """
    series, params = _as_series(trace, params, y_window)
    field = SampledField.from_series(
        series, lambda snap, mod: transport_velocity(snap, mod, params, velocity)
    )
    if not field.s[0] <= s0 < s1 <= field.s[-1]:
        msg = f"s range [{s0:.4g}, {s1:.4g}] not covered by [{field.s[0]:.4g}, {field.s[-1]:.4g}]"
        raise ValueError(msg)
    lo, hi = field.window(s0)
    if not lo < y0 < hi:
        msg = f"y0={y0:g} outside the window [{lo:g}, {hi:g}] at s={s0:.4g}"
        raise WindowError(msg)

    def rhs(s, y):
        return [field(s, y[0])]

    def leaves_window(s, y):
        lo, hi = field.window(s)
        return min(y[0] - lo, hi - y[0])

    leaves_window.terminal = True
    leaves_window.direction = -1

    sol = scipy.integrate.solve_ivp(
        rhs,
        (s0, s1),
        [y0],
        method="RK45",
        events=leaves_window,
        dense_output=True,
        rtol=1e-8,
        atol=1e-10 * max(1.0, abs(y0)),
    )
    if not sol.success:
        msg = f"trajectory integration failed: {sol.message}"
        raise RuntimeError(msg)

    exited = sol.status == 1
    s_end = float(sol.t[-1])
    if exited:
        log.debug("trajectory from y0=%g left the window at s=%.4g", y0, s_end)
    s = np.linspace(s0, s_end, samples)
    return TrajectoryPath(velocity, float(y0), float(s0), s, sol.sol(s)[0], exited)


def path_lower_bound(path: TrajectoryPath, rate: float, slack: float = 0.01) -> BoundCheck:
    """Check ``|ψ(s)| >= |y0| e^{rate (s - s0)}`` along the path, within `slack`."""
    bound = abs(path.y0) * np.exp(rate * (path.s - path.s0))
    ratio = np.abs(path.psi) / bound
    worst = float(ratio.min())
    return BoundCheck(passed=worst >= 1 - slack, worst_ratio=worst)


def path_decay_integral(path: TrajectoryPath, rate: float = TAIL_RATE) -> DecayIntegral:
    """``∫ (1 + ψ²)^{-1/3} ds`` along the path plus an estimate of the remaining tail.

    Past the end of the path ``|ψ|`` is assumed to grow at least like
    ``|ψ_end| e^{rate (s - s_end)}``, which bounds the tail by
    ``|ψ_end|^{-2/3} / (2/3 · rate)``.
    """
    integrand = (1 + path.psi**2) ** (-1 / 3)
    sampled = float(scipy.integrate.trapezoid(integrand, path.s))
    end = abs(path.psi[-1])
    tail = end ** (-2 / 3) / (2 / 3 * rate) if end > 0 else np.inf
    total = sampled + tail
    return DecayIntegral(total=total, tail=tail, tail_fraction=tail / total)


def transport_along_path(
    path: TrajectoryPath,
    damping: np.ndarray,
    forcing: np.ndarray,
    f0: float,
) -> np.ndarray:
    """Solve ``∂_s f + D f = F`` along a path.

    ``f(s) = f0 e^{-∫D} + ∫ e^{-∫_{s'}^{s} D} F(s') ds'``, with `damping` and
    `forcing` sampled at ``path.s``.
    """
    accumulated = scipy.integrate.cumulative_trapezoid(damping, path.s, initial=0)
    weight = np.exp(-accumulated)
    source = scipy.integrate.cumulative_trapezoid(forcing / weight, path.s, initial=0)
    return weight * (f0 + source)


def sample_along_path(
    path: TrajectoryPath,
    series: SelfSimilarSeries,
    fn: Callable[[SelfSimilarSnapshot, ModulationState], np.ndarray],
) -> np.ndarray:
    """Evaluate a snapshot field along a path."""
    field = SampledField.from_series(series, fn)
    return np.array([field(s, y) for s, y in zip(path.s, path.psi)])


class Separation(NamedTuple):
    """A ``z``-characteristic and its distance to the blow-up point tracker."""

    t: np.ndarray
    psi: np.ndarray
    gap: np.ndarray
    slope_integral: np.ndarray
    crossed: bool


def characteristic_separation(trace: RunTrace, x0: float, samples: int = 400) -> Separation:
    """Follow ``dψ/dt = λ_z(ψ, t)`` from ``ψ(0) = x0`` through the stored snapshots.

    Reports ``ψ - ξ`` for the empirical ``ξ`` and the running integral of
    ``|w_x(ψ(t), t)|``, which stays finite because ``z``-characteristics cross the
    steepening region transversally.
    """
    params = trace.params
    snaps = trace.snapshots
    if len(snaps) < 2:
        msg = "need at least two snapshots"
        raise ValueError(msg)

    times = np.array([s.t for s in snaps])
    x = snaps[0].x_grid
    speeds = [transport_speeds(s.w, s.z, params)[1] for s in snaps]
    slopes = [np.abs(slope_field(s.w, params.dx)) for s in snaps]

    def interp(stack, t, y):
        k = int(np.clip(np.searchsorted(times, t) - 1, 0, times.size - 2))
        frac = (t - times[k]) / (times[k + 1] - times[k])
        return (1 - frac) * np.interp(y, x, stack[k]) + frac * np.interp(y, x, stack[k + 1])

    def rhs(t, state):
        return [interp(speeds, t, state[0]), interp(slopes, t, state[0])]

    sol = scipy.integrate.solve_ivp(
        rhs,
        (times[0], times[-1]),
        [x0, 0.0],
        dense_output=True,
        rtol=1e-8,
        atol=1e-12,
    )
    t = np.linspace(times[0], times[-1], samples)
    psi, integral = sol.sol(t)

    xi_series = empirical_series(trace)
    xi = np.interp(t, xi_series.t, xi_series.xi) if len(xi_series) else np.zeros_like(t)
    gap = psi - xi
    crossed = bool(np.any(np.sign(gap[1:]) != np.sign(gap[:-1])))
    return Separation(t=t, psi=psi, gap=gap, slope_integral=integral, crossed=crossed)
