"""Gaussian heat kernel and the Duhamel form of the chemoattractant equation.

The chemoattractant obeys :math:`\\phi_t = D\\phi_{xx} - \\lambda\\phi + S(q)` with
:math:`\\lambda = D = 2/(1+\\alpha)`, so that

.. math::

    \\phi(t) = e^{-\\lambda t} H_{Dt} * \\phi_0
        + \\int_0^t e^{-\\lambda (t-t')} H_{D(t-t')} * S(t') \\, dt',

with :math:`H_t(x) = (4\\pi t)^{-1/2} e^{-x^2/4t}`. Convolutions are done by direct
quadrature with the kernel truncated at :math:`8\\sqrt{2t}`; the field is extended
beyond the grid by its boundary values.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
import scipy.integrate
import scipy.ndimage

from hpcblowup.model import ModelParams, chemo_source

log = logging.getLogger(__name__)

TRUNCATE = 8.0


class HistoryError(ValueError):
    """The source history does not cover the requested time range."""


class FieldHistory(NamedTuple):
    """Time-indexed samples of ``q = (w - z)/2``; ``q[k]`` is taken at ``t[k]``."""

    t: np.ndarray
    q: np.ndarray


class DecayCheck(NamedTuple):
    """Outcome of :func:`weighted_decay_check`.

    ``c1_by_time`` is the running maximum of the weighted sup norms over the sampled
    times, so the constant is nondecreasing in the final time.
    """

    c1: float
    passed: bool
    times: np.ndarray
    c1_by_time: np.ndarray
    edge_ratio: float


def heat_kernel_weights(t: float, dx: float) -> np.ndarray:
    """Discrete kernel :math:`H_t(j\\Delta x)\\Delta x` on the truncated support."""
    if t <= 0:
        msg = f"heat kernel time must be positive, got {t}"
        raise ValueError(msg)

    half = max(1, int(np.ceil(TRUNCATE * np.sqrt(2 * t) / dx)))
    x = np.arange(-half, half + 1) * dx
    weights = np.exp(-(x**2) / (4 * t)) * dx / np.sqrt(4 * np.pi * t)

    if t < dx**2:
        # kernel narrower than the grid
        log.debug("renormalising heat kernel at t=%g < dx^2=%g", t, dx**2)
        weights /= weights.sum()
    return weights


def convolve(f: np.ndarray, t: float, dx: float) -> np.ndarray:
    """Return :math:`H_t * f` on the grid of `f`."""
    return scipy.ndimage.convolve1d(
        np.asarray(f, dtype=float), heat_kernel_weights(t, dx), mode="nearest"
    )


def duhamel_step(
    phi: np.ndarray,
    source_old: np.ndarray,
    source_new: np.ndarray,
    dt: float,
    params: ModelParams,
    dx: float,
) -> np.ndarray:
    """Advance the chemoattractant by one step of the exact semigroup.

    The source integral over the step is taken with the trapezoid rule, using the
    identity limit of the kernel at the upper endpoint.
    """
    decay = np.exp(-params.rate * dt)
    spread = convolve(phi + dt / 2 * source_old, params.rate * dt, dx)
    return decay * spread + dt / 2 * source_new


def duhamel_phi(
    phi0: np.ndarray,
    q_history: FieldHistory,
    t: float,
    params: ModelParams,
    dx: float,
) -> np.ndarray:
    """Evaluate the full Duhamel integral for the chemoattractant at time `t`.

    The time integral runs over all stored history samples up to `t` (trapezoid); if
    `t` is not a sample time, ``q`` is interpolated linearly at `t`.
    """
    times = np.asarray(q_history.t, dtype=float)
    q = np.asarray(q_history.q, dtype=float)
    if times.size == 0 or q.shape[0] != times.size:
        msg = "history times and samples do not match"
        raise HistoryError(msg)
    if np.any(np.diff(times) <= 0):
        msg = "history times must be strictly increasing"
        raise HistoryError(msg)
    tol = 1e-12 * max(1.0, abs(t))
    if times[0] > tol or times[-1] < t - tol:
        msg = f"history covers [{times[0]}, {times[-1]}], need [0, {t}]"
        raise HistoryError(msg)
    if np.any(q <= 0):
        msg = "history contains nonpositive q"
        raise HistoryError(msg)

    keep = times < t - tol
    sample_t = times[keep]
    sample_q = q[keep]
    if t > tol:
        k = np.searchsorted(times, t)
        if k < times.size and abs(times[k] - t) <= tol:
            q_end = q[k]
        else:
            frac = (t - times[k - 1]) / (times[k] - times[k - 1])
            q_end = (1 - frac) * q[k - 1] + frac * q[k]
        sample_t = np.append(sample_t, t)
        sample_q = np.vstack([sample_q, q_end])

    lam = params.rate
    homogeneous = (
        np.exp(-lam * t) * convolve(phi0, params.rate * t, dx)
        if t > 0
        else np.asarray(phi0, dtype=float).copy()
    )
    if sample_t.size < 2:
        return homogeneous

    integrand = np.empty_like(sample_q)
    for k, (tk, qk) in enumerate(zip(sample_t, sample_q)):
        source = chemo_source(qk, params)
        lag = t - tk
        integrand[k] = (
            np.exp(-lam * lag) * convolve(source, params.rate * lag, dx)
            if lag > tol
            else source
        )

    return homogeneous + scipy.integrate.trapezoid(integrand, x=sample_t, axis=0)


def weighted_decay_check(
    f: np.ndarray,
    a: float,
    T: float,
    x: np.ndarray,
    times: np.ndarray | None = None,
    edge: float = 0.8,
    slack: float = 0.01,
) -> DecayCheck:
    """Fit the constant of the weighted heat-kernel decay estimates.

    Evaluates, for sampled :math:`t \\in (0, T]`,

    .. math::

        C_1(t) = \\max\\left(\\sup_x (1+x^2)^a |H_t * f|,\\;
            t^{1/2} \\sup_x (1+x^2)^a |H_t * f_x|\\right)

    and returns its running maximum. On a finite grid a decay slower than claimed
    shows up as a weighted profile that peaks at the domain edge, so the check fails
    when the sup over ``|x| >= edge·L`` exceeds the interior sup by more than `slack`.
    """
    if a <= 0:
        msg = f"decay exponent must be positive, got {a}"
        raise ValueError(msg)
    if T <= 0:
        msg = f"final time must be positive, got {T}"
        raise ValueError(msg)

    f = np.asarray(f, dtype=float)
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    if times is None:
        times = np.geomspace(max(T * 1e-3, dx**2), T, 16)
    times = np.sort(np.asarray(times, dtype=float))

    weight = (1 + x**2) ** a
    f_x = np.gradient(f, dx)
    outer = np.abs(x) >= edge * np.abs(x).max()

    c1_t = np.empty(times.size)
    ratio = 0.0
    for k, t in enumerate(times):
        value = weight * np.abs(convolve(f, t, dx))
        slope = np.sqrt(t) * weight * np.abs(convolve(f_x, t, dx))
        profile = np.maximum(value, slope)
        c1_t[k] = profile.max()
        inner_max = profile[~outer].max()
        outer_max = profile[outer].max()
        if outer_max > 0:
            ratio = max(ratio, outer_max / inner_max if inner_max > 0 else np.inf)

    running = np.maximum.accumulate(c1_t)
    passed = bool(np.isfinite(running[-1]) and ratio <= 1 + slack)
    log.debug("weighted decay check a=%g: C1=%g edge ratio=%g", a, running[-1], ratio)
    return DecayCheck(
        c1=float(running[-1]),
        passed=passed,
        times=times,
        c1_by_time=running,
        edge_ratio=float(ratio),
    )
