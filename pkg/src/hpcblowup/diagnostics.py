"""Quantitative checks of the blow-up scenario on a finished run.

All fits are ordinary least squares on (log-)transformed data and report their
residuals. Profile quantities refer to the stop time of the run, which lies before the
blow-up time itself.
"""

from __future__ import annotations

import logging
import warnings
from typing import NamedTuple

import numpy as np
import scipy.integrate
import scipy.optimize

from hpcblowup.bootstrap import Margin, bootstrap_margins
from hpcblowup.burgers import wbar_deriv
from hpcblowup.model import ModelParams, PhysicalState
from hpcblowup.modulation import ModulationSeries, SelfSimilarSeries, SelfSimilarSnapshot
from hpcblowup.solver import RunTrace, SlopeSeries, slope_field, t_star_extrapolated

log = logging.getLogger(__name__)


class FitError(ValueError):
    """The data do not support the requested fit."""


class RateFit(NamedTuple):
    t_star: float
    t_star_uncertainty: float
    exponent: float
    exponent_uncertainty: float
    residual: float
    decades: float
    n_samples: int
    extrapolated: bool = False
    free_t_star: float = np.nan
    free_exponent: float = np.nan


class CuspFit(NamedTuple):
    exponent: float
    asymmetry: float
    left: float
    right: float
    gradient_exponent: float
    decades: float
    residual: float


class EnvelopeCheck(NamedTuple):
    passed: bool
    worst_lower: float
    worst_upper: float
    n_samples: int


class ContinuationIntegral(NamedTuple):
    t: np.ndarray
    integral: np.ndarray
    log_coefficient: float
    diverging: bool


class RegularityContrast(NamedTuple):
    phixx_growth: float
    wx_growth: float
    max_zx: float
    bound_zx: float


class ProfileDistance(NamedTuple):
    s: float
    inner: float
    middle: float
    outer: float


class DiagnosticsReport(NamedTuple):
    """Summary of all diagnostics of one run.

    Profile quantities (cusp fit, envelope, profile distance) are evaluated at
    `evaluated_at`, the stop time of the run.
    """

    T_star_est: float
    T_star_uncertainty: float
    T_star_extrapolated: float
    x_star_est: float
    x_star_cusp: float
    rate: RateFit | None
    cusp: CuspFit | None
    envelope: EnvelopeCheck | None
    bootstrap_violations: list[Margin]
    continuation: ContinuationIntegral
    contrast: RegularityContrast
    profile: ProfileDistance | None
    continuity_modulus: float
    gradients_at_xi: tuple[float, float]
    stop_reason: str
    evaluated_at: float
    notes: list[str]

    @property
    def rate_exponent(self) -> float:
        return self.rate.exponent if self.rate is not None else np.nan

    @property
    def cusp_exponent(self) -> float:
        return self.cusp.exponent if self.cusp is not None else np.nan


def fit_blowup_rate(
    slope_series: SlopeSeries,
    min_decades: float = 1.5,
    min_samples: int = 20,
    dx: float | None = None,
    max_resolution: float | None = None,
) -> RateFit:
    """Fit ``1/|min w_x|`` linearly in ``t`` and ``|min w_x|`` against ``T* - t`` in log-log.

    The root of the linear fit is the blow-up time. Samples from the last minimum of
    ``|min w_x|`` onwards enter the fit; with `dx` and `max_resolution` samples with
    ``|min w_x| dx > max_resolution`` are dropped. The exponent measured against that
    root is complemented by ``free_exponent`` and ``free_t_star`` from a fit in which
    the blow-up time is a third free parameter.

    Raises
    ------
    FitError
        if fewer than `min_samples` samples remain or they span less than
        `min_decades` decades of ``|min w_x|``.
    """
    t = np.asarray(slope_series.t, dtype=float)
    m = np.asarray(slope_series.min_wx, dtype=float)
    keep = m < 0
    if dx is not None and max_resolution is not None:
        keep &= np.abs(m) * dx <= max_resolution
    t, m = t[keep], np.abs(m[keep])
    if t.size:
        start = int(np.argmin(m))
        t, m = t[start:], m[start:]

    if t.size < min_samples:
        msg = f"{t.size} usable samples, need {min_samples}"
        raise FitError(msg)
    decades = float(np.log10(m.max() / m.min()))
    if decades < min_decades:
        msg = f"|min w_x| spans {decades:.2f} decades, need {min_decades}"
        raise FitError(msg)

    (a, b), cov = np.polyfit(t, 1 / m, 1, cov=True)
    t_star = -b / a
    jac = np.array([b / a**2, -1 / a])
    spread = float(np.sqrt(max(jac @ cov @ jac, 0.0)))
    floor = max(float(np.abs(np.diff(t[-2:])).max()), 1e-12 * abs(t_star))
    extrapolated = False
    if not t_star > t[-1]:
        log.warning(
            "linear fit root %.6g precedes the last sample %.6g, using the characteristic extrapolation",
            t_star,
            t[-1],
        )
        t_star = t[-1] + 1 / m[-1]
        extrapolated = True

    lag = t_star - t
    usable = lag > 0
    (exponent, offset), log_cov = np.polyfit(
        np.log(lag[usable]), np.log(m[usable]), 1, cov=True
    )
    predicted = exponent * np.log(lag[usable]) + offset
    residual = float(np.sqrt(np.mean((np.log(m[usable]) - predicted) ** 2)))
    free_t_star, free_exponent = _free_rate_fit(t, m, t_star, exponent, offset)

    fit = RateFit(
        t_star=float(t_star),
        t_star_uncertainty=max(spread, floor),
        exponent=float(exponent),
        exponent_uncertainty=float(np.sqrt(max(log_cov[0, 0], 0.0))),
        residual=residual,
        decades=decades,
        n_samples=int(t.size),
        extrapolated=extrapolated,
        free_t_star=free_t_star,
        free_exponent=free_exponent,
    )
    log.info(
        "blow-up rate fit: T* = %.6g ± %.2g, exponent %.4f (%.4f with T* = %.6g free)",
        fit.t_star,
        fit.t_star_uncertainty,
        fit.exponent,
        fit.free_exponent,
        fit.free_t_star,
    )
    return fit


def _free_rate_fit(
    t: np.ndarray, m: np.ndarray, t_star: float, exponent: float, offset: float
) -> tuple[float, float]:
    """``log|min w_x| = c + p log(T* - t)`` with ``T*`` a free parameter.

    Starts from the fixed-``T*`` fit; returns NaNs when the fit does not converge.
    """
    floor = t[-1] + 1e-6 * (t_star - t[-1])

    def model(t, c, p, T):
        return c + p * np.log(np.maximum(T - t, 1e-300))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.optimize.OptimizeWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            (_, p, T), _ = scipy.optimize.curve_fit(
                model,
                t,
                np.log(m),
                p0=(offset, exponent, t_star),
                bounds=([-np.inf, -np.inf, floor], [np.inf, np.inf, np.inf]),
            )
        except (RuntimeError, ValueError) as e:
            log.debug("free blow-up rate fit failed: %s", e)
            return np.nan, np.nan
    return float(T), float(p)


def _loglog(d: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    slope, offset = np.polyfit(np.log(d), np.log(v), 1)
    residual = float(np.sqrt(np.mean((np.log(v) - (slope * np.log(d) + offset)) ** 2)))
    return float(slope), residual


def fit_cusp_exponent(
    final_state: PhysicalState,
    x_star: float,
    inner_cells: int = 3,
    outer: float = 0.8,
    min_decades: float = 1.5,
) -> CuspFit:
    """Hölder exponent of ``w`` at `x_star` from log-log fits on both sides.

    The fit window starts above the innermost `inner_cells` cells and above ten
    times the core width ``|min w_x|^{-3/2}``, and ends at `outer`.

    Raises
    ------
    FitError
        if the window spans fewer than `min_decades` decades.
    """
    x = final_state.x_grid
    w = final_state.w
    dx = x[1] - x[0]
    slope = slope_field(w, dx)
    core = abs(slope.min()) ** (-1.5) if slope.min() < 0 else 0.0
    d_min = max(inner_cells * dx, 10 * core)
    d_max = min(outer, x_star - x[0], x[-1] - x_star)
    decades = float(np.log10(d_max / d_min)) if d_max > d_min else 0.0
    if decades < min_decades:
        msg = f"cusp resolved over {decades:.2f} decades, need {min_decades}"
        raise FitError(msg)

    w_star = float(np.interp(x_star, x, w))
    d = np.abs(x - x_star)
    window = (d >= d_min) & (d <= d_max)
    sides = {}
    residuals = []
    for name, side in (("left", x < x_star), ("right", x > x_star)):
        sel = window & side & (np.abs(w - w_star) > 0)
        if np.count_nonzero(sel) >= 3:
            sides[name], res = _loglog(d[sel], np.abs(w[sel] - w_star))
            residuals.append(res)
    if not sides:
        msg = "no samples inside the cusp window"
        raise FitError(msg)

    sel = window & (slope < 0)
    gradient_exponent = _loglog(d[sel], np.abs(slope[sel]))[0] if np.count_nonzero(sel) >= 3 else np.nan

    left = sides.get("left", np.nan)
    right = sides.get("right", np.nan)
    exponents = [v for v in (left, right) if np.isfinite(v)]
    fit = CuspFit(
        exponent=float(np.mean(exponents)),
        asymmetry=float(abs(left - right)) if len(exponents) == 2 else np.nan,
        left=float(left),
        right=float(right),
        gradient_exponent=float(gradient_exponent),
        decades=decades,
        residual=float(max(residuals)),
    )
    log.info("cusp fit: exponent %.4f, gradient exponent %.4f", fit.exponent, fit.gradient_exponent)
    return fit


def cusp_envelope(
    state: PhysicalState, x_star: float, s: float, outer: float = 0.8, slack: float = 0.01
) -> EnvelopeCheck:
    """Check ``-(7/20)|x-x*|^{-2/3} <= w_x <= -(1/4)|x-x*|^{-2/3}``.

    Evaluated on ``100 e^{-3s/2} <= |x - x*| <= outer``.
    """
    x = state.x_grid
    slope = slope_field(state.w, x[1] - x[0])
    d = np.abs(x - x_star)
    sel = (d >= 100 * np.exp(-1.5 * s)) & (d <= outer)
    if not np.any(sel):
        return EnvelopeCheck(True, 0.0, 0.0, 0)
    scale = d[sel] ** (-2 / 3)
    worst_lower = float(np.max(-slope[sel] / (7 / 20 * scale)))
    worst_upper = float(np.max(1 / 4 * scale / np.maximum(-slope[sel], 1e-300)))
    return EnvelopeCheck(
        passed=worst_lower <= 1 + slack and worst_upper <= 1 + slack,
        worst_lower=worst_lower,
        worst_upper=worst_upper,
        n_samples=int(np.count_nonzero(sel)),
    )


def gradient_continuity_modulus(state: PhysicalState, x_star: float, exclusion: float) -> float:
    """Largest jump of ``w_x`` between neighbouring nodes farther than `exclusion` from `x_star`."""
    x = state.x_grid
    slope = slope_field(state.w, x[1] - x[0])
    far = np.abs(x - x_star) >= exclusion
    pairs = far[1:] & far[:-1]
    if not np.any(pairs):
        return 0.0
    return float(np.abs(np.diff(slope))[pairs].max())


def regularity_contrast(trace: RunTrace) -> RegularityContrast:
    """Growth of ``‖phi_xx‖`` and ``‖w_x‖`` over the run, and the largest ``‖z_x‖``."""
    norms = trace.norm_series
    slopes = np.abs(trace.slope_series.min_wx)
    first_phi = norms.phixx[0]
    return RegularityContrast(
        phixx_growth=float(norms.phixx.max() / first_phi) if first_phi > 0 else np.nan,
        wx_growth=float(slopes[-1] / slopes[0]) if slopes[0] > 0 else np.inf,
        max_zx=float(norms.zx.max()),
        bound_zx=2 * trace.params.M,
    )


def continuation_integral(trace: RunTrace, growth: float = 2.0) -> ContinuationIntegral:
    """Running integral of ``‖q_x‖ + ‖u_x‖`` and its logarithmic growth rate.

    The log coefficient is fitted on the samples where the integrand exceeds
    `growth` times its initial value, against ``-ln(T* - t)`` with the extrapolated
    blow-up time.
    """
    norms = trace.norm_series
    t = norms.t
    integrand = norms.qx + norms.ux
    integral = scipy.integrate.cumulative_trapezoid(integrand, t, initial=0)

    coefficient = np.nan
    if t.size >= 2 and integrand[0] > 0:
        t_star = t_star_extrapolated(trace)
        sel = (integrand >= growth * integrand[0]) & (t < t_star)
        if np.count_nonzero(sel) >= 3:
            coefficient = float(np.polyfit(-np.log(t_star - t[sel]), integral[sel], 1)[0])

    diverging = bool(trace.stop_reason == "slope-threshold" and coefficient >= 0.5)
    return ContinuationIntegral(t, integral, coefficient, diverging)


def profile_distance(snapshot: SelfSimilarSnapshot, params: ModelParams) -> ProfileDistance:
    """Weighted sup distances of ``∂_y W`` from the stable profile.

    ``inner`` on ``|y| <= 1/M``, ``middle`` weighted by ``(1+y²)^{1/3}`` on
    ``1/M <= |y| <= e^{3s/2}``, ``outer`` the weighted ``|∂_y W|`` beyond; empty regions
    give NaN.
    """
    y = snapshot.y_grid
    deviation = np.abs(snapshot.dW[0] - wbar_deriv(y, 1))
    weight = (1 + y**2) ** (1 / 3)
    edge = np.exp(1.5 * snapshot.s)
    l = 1 / params.M

    def sup(values, mask):
        return float(values[mask].max()) if np.any(mask) else np.nan

    return ProfileDistance(
        s=snapshot.s,
        inner=sup(deviation, np.abs(y) <= l),
        middle=sup(weight * deviation, (np.abs(y) >= l) & (np.abs(y) <= edge)),
        outer=sup(weight * np.abs(snapshot.dW[0]), np.abs(y) >= edge),
    )


def diagnose(
    trace: RunTrace,
    series: ModulationSeries,
    selfsimilar: SelfSimilarSeries,
    params: ModelParams,
    fit_min_decades: float = 1.5,
    fit_resolution: float | None = None,
) -> DiagnosticsReport:
    """Assemble all diagnostics of a finished run.

    Failed fits are recorded in the notes of the report instead of raising.
    """
    notes = []
    final = trace.final
    dx = params.dx

    try:
        rate = fit_blowup_rate(
            trace.slope_series, fit_min_decades, dx=dx, max_resolution=fit_resolution
        )
        t_star, t_star_err = rate.t_star, rate.t_star_uncertainty
    except FitError as e:
        notes.append(f"rate fit: {e}")
        log.warning("rate fit failed: %s", e)
        rate = None
        t_star = t_star_extrapolated(trace)
        t_star_err = abs(trace.slope_series.t[-1] - trace.slope_series.t[-2]) if len(trace.slope_series.t) > 1 else np.nan

    x_star_cusp = float(trace.slope_series.argmin_x[-1])
    if len(series) >= 2 and series.t[-1] > series.t[0]:
        # extrapolate ξ(t) linearly to the blow-up time
        x_star = float(series.xi[-1] + series.xi_dot[-1] * (t_star - series.t[-1]))
    elif len(series):
        x_star = float(series.xi[-1])
    else:
        x_star = x_star_cusp

    cusp = envelope = None
    try:
        cusp = fit_cusp_exponent(final, x_star_cusp)
    except FitError as e:
        notes.append(f"cusp fit: {e}")
        log.warning("cusp fit failed: %s", e)
    if trace.stop_reason == "slope-threshold":
        # τ - t = 1/|min w_x| at the stop
        s_stop = float(np.log(abs(trace.slope_series.min_wx[-1])))
        envelope = cusp_envelope(final, x_star_cusp, s_stop)

    violations = []
    for mod, snap in selfsimilar.frames:
        violations += [m for m in bootstrap_margins(snap, mod, params) if m.violated()]
    if violations:
        log.warning("%d bootstrap violations", len(violations))

    profile = profile_distance(selfsimilar.frames[-1][1], params) if len(selfsimilar) else None

    slope = slope_field(final.w, dx)
    zslope = slope_field(final.z, dx)
    q_x = float(np.interp(x_star_cusp, final.x_grid, (slope - zslope) / 2))
    u_x = float(np.interp(x_star_cusp, final.x_grid, (slope + zslope) / 2))

    notes.append(
        f"profile quantities are evaluated at the stop time t={final.t:.6g}, before T*"
    )
    return DiagnosticsReport(
        T_star_est=float(t_star),
        T_star_uncertainty=float(t_star_err),
        T_star_extrapolated=t_star_extrapolated(trace),
        x_star_est=x_star,
        x_star_cusp=x_star_cusp,
        rate=rate,
        cusp=cusp,
        envelope=envelope,
        bootstrap_violations=violations,
        continuation=continuation_integral(trace),
        contrast=regularity_contrast(trace),
        profile=profile,
        continuity_modulus=gradient_continuity_modulus(final, x_star_cusp, 0.05),
        gradients_at_xi=(q_x, u_x),
        stop_reason=trace.stop_reason,
        evaluated_at=float(final.t),
        notes=notes,
    )
