"""Stable self-similar Burgers profile.

The profile :math:`\\bar W(y)` is the real root of :math:`W^3 + W + y = 0`. It is the
steady solution of the self-similar Burgers equation

.. math::

    -\\frac{1}{2} \\bar W + \\left(\\frac{3}{2} y + \\bar W\\right) \\partial_y \\bar W = 0

and the universal local shape of a generic gradient blow-up. Derivatives follow from
implicit differentiation of the cubic, :math:`\\partial_y \\bar W = -1/(1 + 3\\bar W^2)`,
so that :math:`\\partial^n_y \\bar W = P_n(\\bar W) / (1 + 3\\bar W^2)^{2n-1}` with
polynomials :math:`P_n` built by recurrence.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
from numpy.polynomial import Polynomial

from hpcblowup import store

log = logging.getLogger(__name__)

MAX_ORDER = 5


class OrderError(ValueError):
    """Derivative order outside the supported range."""


class ProfileSample(NamedTuple):
    """Profile values on a grid of the similarity coordinate.

    ``values[n]`` holds :math:`\\partial^n_y \\bar W` for ``n = 0..5``.
    """

    y: np.ndarray
    values: np.ndarray

    def column_names(self) -> list[str]:
        return ["y", "W"] + [f"dW{n}" for n in range(1, MAX_ORDER + 1)]


class PropertyCheck(NamedTuple):
    """Outcome of one profile property check."""

    passed: bool
    worst_margin: float
    n_samples: int


class ProfileReport(NamedTuple):
    items: dict[str, PropertyCheck]
    ode_residual: float
    cubic_residual: float

    def all_passed(self) -> bool:
        return all(c.passed for c in self.items.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.items.items() if not c.passed]


def _numerators() -> list[Polynomial]:
    # P_1 = -1; P_{n+1} = -(P_n' (1+3W^2) - (2n-1) 6W P_n)
    base = Polynomial([1.0, 0.0, 3.0])
    six_w = Polynomial([0.0, 6.0])
    polys = [Polynomial([-1.0])]
    for n in range(1, MAX_ORDER):
        p = polys[-1]
        polys.append(-(p.deriv() * base - (2 * n - 1) * six_w * p))
    return polys


_NUMERATORS = _numerators()


@store.register_pluggable
def wbar(y: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the self-similar Burgers profile.

    Uses the cancellation-free form of the real cube-root formula,
    :math:`\\bar W = -\\operatorname{sign}(y)(A - 1/(3A))` with
    :math:`A = (|y|/2 + \\sqrt{y^2/4 + 1/27})^{1/3}`, polished by one Newton step.
    """
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        msg = "the Burgers profile is only defined for finite arguments"
        raise ValueError(msg)

    a = np.cbrt(np.abs(y_arr) / 2 + np.hypot(y_arr / 2, 1 / np.sqrt(27)))
    w = -np.sign(y_arr) * (a - 1 / (3 * a))
    w = w - (w**3 + w + y_arr) / (3 * w**2 + 1)

    return w if w.ndim else float(w)


def wbar_cardano(y: float | np.ndarray) -> float | np.ndarray:
    """Literal sum of the two cube roots.

    Loses accuracy for large :math:`|y|`, kept only to cross-check :func:`wbar`.
    """
    y_arr = np.asarray(y, dtype=float)
    root = np.sqrt(y_arr**2 / 4 + 1 / 27)
    w = np.cbrt(-y_arr / 2 + root) + np.cbrt(-y_arr / 2 - root)
    return w if w.ndim else float(w)


def wbar_deriv(y: float | np.ndarray, n: int) -> float | np.ndarray:
    """Evaluate :math:`\\partial^n_y \\bar W` for ``n = 1..5``.

    Finite everywhere, including ``y = 0``, because it is evaluated through
    :math:`\\bar W` rather than a quotient in ``y``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_ORDER:
        msg = f"derivative order must be in 1..{MAX_ORDER}, got {n}"
        raise OrderError(msg)

    w = np.asarray(wbar(y), dtype=float)
    d = _NUMERATORS[n - 1](w) / (1 + 3 * w**2) ** (2 * n - 1)
    return d if d.ndim else float(d)


def profile_table(y: np.ndarray) -> ProfileSample:
    """Sample the profile and its first five derivatives on `y`."""
    y = np.asarray(y, dtype=float)
    values = np.empty((MAX_ORDER + 1, y.size))
    values[0] = wbar(y)
    for n in range(1, MAX_ORDER + 1):
        values[n] = wbar_deriv(y, n)
    return ProfileSample(y=y, values=values)


def profile_grid(y_max: float = 1e6, num: int = 100_000) -> np.ndarray:
    """Symmetric sample grid with a linear core on ``|y| <= 1`` and log-spaced tails.

    The grid always contains ``y = 0``.
    """
    n_core = num // 5
    n_tail = (num - n_core) // 2
    core = np.linspace(-1, 1, n_core)
    tail = np.geomspace(1, y_max, n_tail)
    return np.union1d(np.concatenate([-tail, core, tail]), [0.0])


def _check(margin: np.ndarray) -> PropertyCheck:
    # margin <= 0 means the inequality holds
    if margin.size == 0:
        return PropertyCheck(passed=True, worst_margin=-np.inf, n_samples=0)
    worst = float(np.max(margin))
    return PropertyCheck(passed=worst <= 0, worst_margin=worst, n_samples=margin.size)


def check_profile_properties(y_grid: np.ndarray, tol: float = 1e-10) -> ProfileReport:
    """Verify the structural properties of the Burgers profile on a sample grid.

    Items
    -----
    ``origin``
        :math:`\\bar W(0) = 0`, :math:`\\partial_y \\bar W(0) = -1`,
        :math:`\\partial^2_y \\bar W(0) = 0`, :math:`\\partial^3_y \\bar W(0) = 6`
        (within `tol`).
    ``weighted``
        :math:`|\\bar W| \\le (1+y^2)^{1/6}`, :math:`|\\partial_y \\bar W| \\le
        (1+y^2)^{-1/3}`, :math:`|\\partial^2_y \\bar W| \\le (1+y^2)^{-5/6}`.
    ``inner``
        :math:`|\\partial^3_y \\bar W| \\le 6`, :math:`|\\partial^4_y \\bar W| \\le 30`,
        :math:`|\\partial^5_y \\bar W| \\le 360` on :math:`|y| \\le 1/5`.
    ``far_slope``
        :math:`-\\tfrac{7}{20}|y|^{-2/3} \\le \\partial_y \\bar W \\le
        -\\tfrac14 |y|^{-2/3}` on :math:`|y| \\ge 100`.
    ``auxiliary``
        :math:`5/2 + 3\\partial_y \\bar W + (3y/2 + \\bar W)/(y(1+y^2)) \\ge y^2/(1+y^2)`.
    ``ode``, ``cubic``
        residuals of the profile equation and of the cubic (relative to
        :math:`\\max(1, |y|)`) below `tol`.
    ``monotone``, ``odd``
        :math:`\\partial_y \\bar W < 0` and odd symmetry.

    Inequalities are checked exactly, identities within `tol`.
    """
    y = np.asarray(y_grid, dtype=float).ravel()
    if y.size == 0:
        msg = "cannot check profile properties on an empty grid"
        raise ValueError(msg)

    table = profile_table(y).values
    w, w1, w2, w3, w4, w5 = table
    items = {}

    origin = np.array(
        [
            wbar(0.0),
            wbar_deriv(0.0, 1) + 1,
            wbar_deriv(0.0, 2),
            wbar_deriv(0.0, 3) - 6,
        ]
    )
    items["origin"] = _check(np.abs(origin) - tol)

    weight = 1 + y**2
    items["weighted"] = _check(
        np.concatenate(
            [
                np.abs(w) - weight ** (1 / 6),
                np.abs(w1) - weight ** (-1 / 3),
                np.abs(w2) - weight ** (-5 / 6),
            ]
        )
    )

    inner = np.abs(y) <= 1 / 5
    items["inner"] = _check(
        np.concatenate(
            [np.abs(w3[inner]) - 6, np.abs(w4[inner]) - 30, np.abs(w5[inner]) - 360]
        )
    )

    far = np.abs(y) >= 100
    y_far = np.abs(y[far]) ** (-2 / 3)
    items["far_slope"] = _check(
        np.concatenate([-7 / 20 * y_far - w1[far], w1[far] + y_far / 4])
    )

    # the quotient is 0/0 at y = 0, replaced by its limit 3/2 + dW(0)
    nonzero = y != 0
    quotient = np.empty_like(y)
    quotient[nonzero] = (1.5 * y[nonzero] + w[nonzero]) / (
        y[nonzero] * weight[nonzero]
    )
    quotient[~nonzero] = 1.5 + w1[~nonzero]
    items["auxiliary"] = _check(y**2 / weight - (2.5 + 3 * w1 + quotient))

    ode = np.abs(-0.5 * w + (1.5 * y + w) * w1)
    cubic = np.abs(y + w + w**3) / np.maximum(1, np.abs(y))
    items["ode"] = _check(ode - tol)
    items["cubic"] = _check(cubic - tol)

    items["monotone"] = _check(w1)
    items["odd"] = _check(np.abs(np.asarray(wbar(-y)) + w) - tol * np.maximum(1, np.abs(w)))

    report = ProfileReport(
        items=items, ode_residual=float(ode.max()), cubic_residual=float(cubic.max())
    )
    if report.all_passed():
        log.info("all profile properties hold on %d samples", y.size)
    else:
        log.warning("profile properties violated: %s", ", ".join(report.failed()))
    return report
