"""Initial data seeded by the rescaled Burgers profile, and its constraint validator.

The canonical family is

.. math::

    w_0(x) = \\kappa_0 + \\varepsilon^{1/2} \\bar W(x \\varepsilon^{-3/2}) \\chi(x), \\quad
    z_0(x) = a (1+x^2)^{-1/3}, \\quad
    \\phi_0(x) = \\bar\\phi + c (1+x^2)^{-1/3},

with a cutoff :math:`\\chi \\equiv 1` on the profile region. The profile then
prescribes :math:`w_0(0) = \\kappa_0`, :math:`\\partial_x w_0(0) = -1/\\varepsilon`,
:math:`\\partial^2_x w_0(0) = 0` and :math:`\\partial^3_x w_0(0) = 6\\varepsilon^{-4}`.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from scipy.interpolate import make_interp_spline

from hpcblowup import store
from hpcblowup.burgers import wbar, wbar_deriv
from hpcblowup.model import (
    ModelParams,
    PhysicalState,
    background,
    primitive_from_riemann,
    x_grid,
)

log = logging.getLogger(__name__)

#: constraints that must hold before a run is started
BLOCKING = ("origin_jet", "amplitude", "companion_fields", "z_slope_weight", "positivity")
#: blocking only on grids that resolve the inner scale
RESOLUTION_LIMITED = ("origin_jet",)

POINTS_PER_INNER_SCALE = 64


class ConstructionError(ValueError):
    """The requested initial data violates a construction constraint."""


class InitialDataSpec(NamedTuple):
    """Knobs of the canonical initial-data family.

    Attributes
    ----------
    params
        model parameters.
    cutoff_scale
        width of the transition from the profile to the background.
    z_amplitude
        amplitude ``a`` of ``z_0``.
    phi_perturbation
        amplitude ``c`` of ``phi_0 - phi_bar``.
    profile_radius
        the cutoff equals one on ``|x| <= profile_radius``.
    decoupled
        data for the decoupled Burgers dynamics; the domain and middle-region
        requirements of the coupled system are not enforced.
    """

    params: ModelParams
    cutoff_scale: float = 1.0
    z_amplitude: float = 0.0
    phi_perturbation: float = 0.1
    profile_radius: float = 1.0
    decoupled: bool = False


class ConstraintResult(NamedTuple):
    cid: str
    bound: float
    observed: float
    margin: float
    passed: bool
    note: str = ""
    blocking: bool = False


class ConstraintReport(NamedTuple):
    results: list[ConstraintResult]

    def __getitem__(self, cid: str) -> ConstraintResult:
        for r in self.results:
            if r.cid == cid:
                return r
        msg = f"no constraint named {cid}"
        raise KeyError(msg)

    def passed(self, cid: str) -> bool:
        return self[cid].passed

    def failed(self) -> list[str]:
        return [r.cid for r in self.results if not r.passed]

    def blocking_failures(self) -> list[str]:
        return [r.cid for r in self.results if r.blocking and not r.passed]

    def to_json(self) -> list[dict]:
        return [r._asdict() for r in self.results]


def _smoothstep(t: np.ndarray) -> np.ndarray:
    # 9th order smoothstep, derivatives 1..4 vanish at both ends
    t = np.clip(t, 0, 1)
    return t**5 * (126 + t * (-420 + t * (540 + t * (-315 + 70 * t))))


@store.register_pluggable
def cutoff(x: np.ndarray, radius: float, width: float) -> np.ndarray:
    """C⁴ cutoff: one on ``|x| <= radius``, zero on ``|x| >= radius + width``."""
    if width <= 0:
        msg = f"cutoff width must be positive, got {width}"
        raise ValueError(msg)
    return 1 - _smoothstep((np.abs(x) - radius) / width)


def _profile_deviation(
    x: np.ndarray, spec: InitialDataSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Exact deviation of the built ``w_0`` from the pure profile, in profile units."""
    ε = spec.params.epsilon
    y = x / ε**1.5
    chi = cutoff(x, spec.profile_radius, spec.cutoff_scale)
    h = 1e-6 * max(spec.cutoff_scale, 1e-3)
    dchi = (
        cutoff(x + h, spec.profile_radius, spec.cutoff_scale)
        - cutoff(x - h, spec.profile_radius, spec.cutoff_scale)
    ) / (2 * h)
    value = wbar(y) * (chi - 1)
    slope = wbar_deriv(y, 1) * (chi - 1) + wbar(y) * dchi * ε**1.5
    return value, slope


def _check_middle_region(spec: InitialDataSpec) -> None:
    # middle-region tolerance, evaluated on the exact construction
    params = spec.params
    ε = params.epsilon
    lo = ε**1.5 / params.M
    xs = np.geomspace(lo, 1, 2000)
    value, slope = _profile_deviation(xs, spec)
    weight = 1 + xs**2 / ε**3
    ratio = max(
        np.max(np.abs(value) / (ε**0.2 / 3 * weight ** (1 / 6))),
        np.max(np.abs(slope) / (ε**0.2 / 3 * weight ** (-1 / 3))),
    )
    if ratio > 1:
        msg = (
            f"middle_profile: cutoff (radius {spec.profile_radius}, width "
            f"{spec.cutoff_scale}) deviates from the profile by {ratio:.3g}x the tolerance"
        )
        raise ConstructionError(msg)


def build(spec: InitialDataSpec) -> PhysicalState:
    """Sample the canonical initial data on the grid.

    The domain must satisfy ``L >= max(1, 100·ε^(3/2)·M)`` and the cutoff must leave
    the middle region on the profile. For decoupled data only the cutoff support has
    to fit into the domain, so the Burgers checks can resolve the inner scale on a
    small domain.

    Raises
    ------
    ConstructionError
        if the cutoff cuts into the region where ``w_0`` has to follow the profile
        within the middle-region tolerance.
    ValueError
        if the domain is too small.
    """
    params = spec.params
    ε = params.epsilon
    support = spec.profile_radius + spec.cutoff_scale
    if not spec.decoupled:
        if params.L < max(1.0, 100 * ε**1.5 * params.M):
            msg = f"domain half-width L={params.L} is below max(1, 100·ε^(3/2)·M)"
            raise ValueError(msg)
        if support > params.L:
            log.warning("cutoff support %g extends past the domain L=%g", support, params.L)
        _check_middle_region(spec)
    elif support >= params.L:
        msg = f"cutoff support {support} does not fit into the domain L={params.L}"
        raise ValueError(msg)

    x = x_grid(params)
    if params.dx > ε**1.5 / POINTS_PER_INNER_SCALE:
        log.warning(
            "grid resolves the inner scale with %.1f points, %d recommended",
            ε**1.5 / params.dx,
            POINTS_PER_INNER_SCALE,
        )

    bg = background(params)
    chi = cutoff(x, spec.profile_radius, spec.cutoff_scale)
    w = params.kappa0 + np.sqrt(ε) * wbar(x / ε**1.5) * chi
    bump = (1 + x**2) ** (-1 / 3)
    z = spec.z_amplitude * bump
    phi = bg.phi_bar + spec.phi_perturbation * bump

    log.info(
        "built initial data: ε=%g, N=%d, L=%g, %.1f points per inner scale",
        ε,
        params.N,
        params.L,
        ε**1.5 / params.dx,
    )
    return PhysicalState.at(0.0, x, w, z, phi, params)


def _spline_derivatives(x: np.ndarray, f: np.ndarray, order: int, at=None) -> np.ndarray:
    spline = make_interp_spline(x, f, k=5)
    at = x if at is None else at
    return np.array([spline(at, nu=n) for n in range(order + 1)])


def _inequality(cid, observed, bound, rtol, note="") -> ConstraintResult:
    margin = float(observed / bound) if bound > 0 else (0.0 if observed == 0 else np.inf)
    return ConstraintResult(
        cid=cid,
        bound=float(bound),
        observed=float(observed),
        margin=margin,
        passed=bool(margin <= 1 + rtol),
        note=note,
    )


def validate(
    state: PhysicalState,
    params: ModelParams,
    rtol: float = 1e-2,
) -> ConstraintReport:
    """Evaluate every initial-data constraint on the sampled state.

    Derivatives come from a quintic interpolating spline of the grid values. Region
    constraints are evaluated on dedicated sample points inside each region. Sharp
    inequalities pass within the relative tolerance `rtol`, identities at the origin
    are compared in profile units against `rtol`.

    The report never raises on violated constraints.
    """
    x = state.x_grid
    ε = params.epsilon
    M = params.M
    bg = background(params)
    results = []

    resolution = ε**1.5 / (x[1] - x[0])
    res_note = (
        ""
        if resolution >= POINTS_PER_INNER_SCALE
        else f"grid has {resolution:.1f} points per inner scale"
    )

    dw = _spline_derivatives(x, state.w, 4)

    # values at the origin
    jet = _spline_derivatives(x, state.w, 3, at=np.array([0.0]))[:, 0]
    errors = np.array(
        [
            abs(jet[0] - params.kappa0) / np.sqrt(ε),
            abs(jet[1] * ε + 1),
            abs(jet[2] * ε**2.5),
            abs(jet[3] * ε**4 - 6) / 6,
        ]
    )
    worst = float(errors.max())
    results.append(
        ConstraintResult(
            cid="origin_jet",
            bound=rtol,
            observed=worst,
            margin=worst / rtol,
            passed=worst <= rtol,
            note=res_note,
        )
    )

    # sup norms of the first four derivatives
    sup = np.abs(dw).max(axis=1)
    results.append(_inequality("slope_bounds.d1", sup[1], 1 / ε, rtol))
    literal = sup[2] / ε**2.5
    results.append(
        _inequality(
            "slope_bounds.d2",
            sup[2],
            ε**-2.5,
            rtol,
            note=f"checked against ε^(-5/2); the literal bound ε^(5/2) gives margin {literal:.3g}",
        )
    )
    results.append(_inequality("slope_bounds.d3", sup[3], 7 * ε**-4, rtol))
    results.append(
        _inequality(
            "slope_bounds.d4",
            sup[4],
            ε**-5.5,
            rtol,
            note="the fourth profile derivative peaks near 29.8 in profile units",
        )
    )

    results.append(
        _inequality(
            "amplitude", np.abs(state.w - params.kappa0).max(), params.kappa0 / 8, rtol
        )
    )

    dz = _spline_derivatives(x, state.z, 4)
    dphi = _spline_derivatives(x, state.phi - bg.phi_bar, 4)
    c4 = max(np.abs(dz).max(), np.abs(dphi).max())
    results.append(_inequality("companion_fields", c4, 1.0, rtol))

    # inner region |x| <= ε^(3/2)/M
    lo = ε**1.5 / M
    xs = np.linspace(-lo, lo, 33)
    ys = xs / ε**1.5
    inner = _spline_derivatives(x, state.w, 4, at=xs)
    ratio = np.max(
        np.abs((inner[0] - params.kappa0) / np.sqrt(ε) - wbar(ys)) / (ε**0.2 * M**-4)
    )
    for n in range(1, 5):
        scaled = ε ** (1.5 * n - 0.5) * inner[n]
        ratio = max(
            ratio, np.max(np.abs(scaled - wbar_deriv(ys, n)) / (ε**0.2 * M ** (n - 4)))
        )
    results.append(_inequality("inner_profile", ratio, 1.0, rtol, note=res_note))

    # middle region ε^(3/2)/M <= |x| <= 1
    side = np.geomspace(lo, min(1.0, x[-1]), 400)
    xs = np.concatenate([-side[::-1], side])
    ys = xs / ε**1.5
    middle = _spline_derivatives(x, state.w, 1, at=xs)
    weight = 1 + ys**2
    ratio = max(
        np.max(
            np.abs((middle[0] - params.kappa0) / np.sqrt(ε) - wbar(ys))
            / (ε**0.2 / 3 * weight ** (1 / 6))
        ),
        np.max(
            np.abs(ε * middle[1] - wbar_deriv(ys, 1)) / (ε**0.2 / 3 * weight ** (-1 / 3))
        ),
    )
    results.append(_inequality("middle_profile", ratio, 1.0, rtol, note=res_note))

    # outer region |x| >= 1
    outer = np.abs(x) >= 1
    if np.any(outer):
        ratio = np.max(
            np.abs(ε * dw[1][outer]) / (0.5 * (1 + x[outer] ** 2 / ε**3) ** (-1 / 3))
        )
        results.append(_inequality("outer_slope", ratio, 1.0, rtol))

    # weighted smallness of the perturbation
    weight = (1 + x**2) ** (1 / 3)
    try:
        rho, u, q = primitive_from_riemann(state.w, state.z, params)
    except ValueError:
        results.append(
            ConstraintResult("positivity", 0.0, float(np.min(state.w - state.z) / 2), np.inf, False)
        )
    else:
        results.append(ConstraintResult("positivity", 0.0, float(q.min()), 0.0, True))
        results.append(
            _inequality(
                "weighted_decay.density", np.max(weight * np.abs(rho - bg.rho_bar)), 1.0, rtol
            )
        )
        results.append(
            _inequality("weighted_decay.velocity", np.max(weight * np.abs(u)), 1.0, rtol)
        )
    phi_part = np.max(weight * np.max(np.abs(dphi[:3]), axis=0))
    results.append(_inequality("weighted_decay.phi", phi_part, 1.0, rtol))

    z_weight = (1 + (x / ε**1.5) ** 2) ** (1 / 3) * ε**1.5 * np.abs(dz[1])
    results.append(_inequality("z_slope_weight", z_weight.max(), 0.5, rtol))

    resolved = resolution >= POINTS_PER_INNER_SCALE
    report = ConstraintReport(
        [
            r._replace(blocking=r.cid in BLOCKING and (resolved or r.cid not in RESOLUTION_LIMITED))
            for r in results
        ]
    )
    failed = report.failed()
    if failed:
        log.warning("initial data constraints not met: %s", ", ".join(failed))
    return report
