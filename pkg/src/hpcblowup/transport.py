"""Upwind derivatives for the non-conservative transport terms ``a(x) f_x``.

Both schemes pick the stencil side from the sign of the local speed. Fields are
extended by their edge values, so that the first and last nodes see a flat exterior.
"""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from numba import njit

from hpcblowup import store

log = logging.getLogger(__name__)

TransportSchemes = Literal["weno5", "upwind2"]

WENO_EPS = 1e-6
GHOST = 3


@njit
def _weno5_side(v1, v2, v3, v4, v5):
    p0 = v1 / 3 - 7 * v2 / 6 + 11 * v3 / 6
    p1 = -v2 / 6 + 5 * v3 / 6 + v4 / 3
    p2 = v3 / 3 + 5 * v4 / 6 - v5 / 6

    b0 = 13 / 12 * (v1 - 2 * v2 + v3) ** 2 + 0.25 * (v1 - 4 * v2 + 3 * v3) ** 2
    b1 = 13 / 12 * (v2 - 2 * v3 + v4) ** 2 + 0.25 * (v2 - v4) ** 2
    b2 = 13 / 12 * (v3 - 2 * v4 + v5) ** 2 + 0.25 * (3 * v3 - 4 * v4 + v5) ** 2

    a0 = 0.1 / (WENO_EPS + b0) ** 2
    a1 = 0.6 / (WENO_EPS + b1) ** 2
    a2 = 0.3 / (WENO_EPS + b2) ** 2
    return (a0 * p0 + a1 * p1 + a2 * p2) / (a0 + a1 + a2)


@njit
def weno5_derivative(f: np.ndarray, speed: np.ndarray, dx: float) -> np.ndarray:
    """Fifth-order WENO derivative on the upwind side.

    Parameters
    ----------
    f
        field values on a uniform grid.
    speed
        local transport speed; its sign selects the upwind side.
    dx
        grid spacing.
    """
    n = f.size
    g = np.empty(n + 2 * GHOST)
    g[GHOST : GHOST + n] = f
    g[:GHOST] = f[0]
    g[GHOST + n :] = f[n - 1]

    # first differences, d[j] = (g[j+1] - g[j]) / dx
    d = (g[1:] - g[:-1]) / dx
    out = np.empty(n)
    for i in range(n):
        j = i + GHOST
        if speed[i] >= 0:
            out[i] = _weno5_side(d[j - 3], d[j - 2], d[j - 1], d[j], d[j + 1])
        else:
            out[i] = _weno5_side(d[j + 2], d[j + 1], d[j], d[j - 1], d[j - 2])
    return out


@njit
def upwind2_derivative(f: np.ndarray, speed: np.ndarray, dx: float) -> np.ndarray:
    """Second-order one-sided derivative on the upwind side."""
    n = f.size
    g = np.empty(n + 4)
    g[2 : 2 + n] = f
    g[:2] = f[0]
    g[2 + n :] = f[n - 1]

    out = np.empty(n)
    for i in range(n):
        j = i + 2
        if speed[i] >= 0:
            out[i] = (3 * g[j] - 4 * g[j - 1] + g[j - 2]) / (2 * dx)
        else:
            out[i] = (-3 * g[j] + 4 * g[j + 1] - g[j + 2]) / (2 * dx)
    return out


@store.register_pluggable
def upwind_derivative(
    f: np.ndarray,
    speed: np.ndarray,
    dx: float,
    scheme: TransportSchemes = "weno5",
) -> np.ndarray:
    """Derivative of `f` for the transport term ``speed * f_x``.

    See Also
    --------
    .weno5_derivative .upwind2_derivative
    """
    f = np.ascontiguousarray(f, dtype=np.float64)
    speed = np.ascontiguousarray(speed, dtype=np.float64)
    if scheme == "weno5":
        return weno5_derivative(f, speed, float(dx))
    if scheme == "upwind2":
        return upwind2_derivative(f, speed, float(dx))
    msg = f"Unknown transport scheme {scheme}"
    raise ValueError(msg)


def central_derivative(f: np.ndarray, dx: float, order: int = 1) -> np.ndarray:
    """Fourth-order central first or second derivative, second order near the edges."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    if order == 1:
        out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * dx)
        out[1] = (f[2] - f[0]) / (2 * dx)
        out[-2] = (f[-1] - f[-3]) / (2 * dx)
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dx)
        out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dx)
    elif order == 2:
        out[2:-2] = (
            -f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]
        ) / (12 * dx**2)
        out[1] = (f[2] - 2 * f[1] + f[0]) / dx**2
        out[-2] = (f[-1] - 2 * f[-2] + f[-3]) / dx**2
        out[0] = out[1]
        out[-1] = out[-2]
    else:
        msg = f"central derivative of order {order} is not available"
        raise ValueError(msg)
    return out
