from __future__ import annotations

import numpy as np
import pytest

from hpcblowup.heat_kernel import (
    FieldHistory,
    HistoryError,
    convolve,
    duhamel_phi,
    duhamel_step,
    heat_kernel_weights,
    weighted_decay_check,
)
from hpcblowup.model import ModelParams, background, chemo_source

dx = 1e-3
x = np.arange(-2, 2 + dx / 2, dx)


def gaussian(a):
    # exp(-x^2/4a) evolves to sqrt(a/(a+t)) exp(-x^2/4(a+t))
    return np.exp(-(x**2) / (4 * a))


def test_kernel_mass():
    assert heat_kernel_weights(1e-3, dx).sum() == pytest.approx(1, abs=1e-10)
    # narrower than the grid: renormalised
    assert heat_kernel_weights(1e-8, dx).sum() == pytest.approx(1, abs=1e-14)
    with pytest.raises(ValueError):
        heat_kernel_weights(0.0, dx)


def test_exact_gaussian():
    a, t = 2e-3, 1e-3
    exact = np.sqrt(a / (a + t)) * gaussian(a + t)
    inner = np.abs(x) < 1
    np.testing.assert_allclose(convolve(gaussian(a), t, dx)[inner], exact[inner], atol=1e-8)


def test_semigroup():
    f = gaussian(2e-3)
    inner = np.abs(x) < 1
    twice = convolve(convolve(f, 1e-3, dx), 2e-3, dx)
    once = convolve(f, 3e-3, dx)
    assert np.abs(twice - once)[inner].max() < 1e-8


def test_maximum_principle():
    f = np.where(np.abs(x) < 0.5, 1.0, 0.0) + 0.2 * np.sin(7 * x)
    for t in (1e-6, 1e-4, 1e-2):
        g = convolve(f, t, dx)
        assert g.max() <= f.max() + 1e-12
        assert g.min() >= f.min() - 1e-12


def test_equilibrium_step():
    params = ModelParams.create()
    bg = background(params)
    phi = np.full_like(x, bg.phi_bar)
    source = chemo_source(np.full_like(x, bg.q_bar), params)
    out = duhamel_step(phi, source, source, 1e-3, params, dx)
    np.testing.assert_allclose(out, bg.phi_bar, rtol=1e-8)


def test_duhamel_integral_at_equilibrium():
    params = ModelParams.create()
    xs = np.linspace(-2, 2, 401)
    bg = background(params)
    t_end = 0.1
    times = np.linspace(0, t_end, 101)
    history = FieldHistory(times, np.full((times.size, xs.size), bg.q_bar))
    phi = duhamel_phi(np.zeros_like(xs), history, t_end, params, xs[1] - xs[0])
    expected = bg.phi_bar * (1 - np.exp(-params.rate * t_end))
    np.testing.assert_allclose(phi, expected, rtol=1e-5)


def test_duhamel_interpolates_end_time():
    params = ModelParams.create()
    xs = np.linspace(-2, 2, 401)
    bg = background(params)
    times = np.linspace(0, 0.1, 11)
    history = FieldHistory(times, np.full((times.size, xs.size), bg.q_bar))
    phi0 = np.full_like(xs, bg.phi_bar)
    h = xs[1] - xs[0]
    np.testing.assert_allclose(duhamel_phi(phi0, history, 0.055, params, h), bg.phi_bar, rtol=1e-4)
    np.testing.assert_allclose(duhamel_phi(phi0, history, 0.0, params, h), bg.phi_bar)


def test_history_errors():
    params = ModelParams.create()
    q = np.ones((3, x.size))
    with pytest.raises(HistoryError):
        duhamel_phi(x, FieldHistory(np.array([0, 0.2, 0.1]), q), 0.1, params, dx)
    with pytest.raises(HistoryError):
        duhamel_phi(x, FieldHistory(np.array([0, 0.1, 0.2]), q), 0.5, params, dx)
    with pytest.raises(HistoryError):
        duhamel_phi(x, FieldHistory(np.array([0, 0.1, 0.2]), -q), 0.1, params, dx)
    with pytest.raises(HistoryError):
        duhamel_phi(x, FieldHistory(np.array([0, 0.1]), q), 0.1, params, dx)


def test_weighted_decay():
    xs = np.linspace(-20, 20, 4001)
    check = weighted_decay_check(np.exp(-(xs**2)), 1 / 3, 1.0, xs)
    assert check.passed
    assert np.isfinite(check.c1)
    assert np.all(np.diff(check.c1_by_time) >= 0)

    # a constant does not decay at all
    check = weighted_decay_check(np.ones_like(xs), 1 / 3, 1.0, xs)
    assert not check.passed

    with pytest.raises(ValueError):
        weighted_decay_check(np.ones_like(xs), 0.0, 1.0, xs)
