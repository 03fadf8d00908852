"""Model parameters, background state and variable conversions.

The chemotaxis system is evolved in Riemann variables

.. math::

    q = \\rho^\\alpha / \\alpha, \\quad w = u + q + \\kappa_0/2, \\quad z = u - q + \\kappa_0/2,

with :math:`\\alpha = (\\gamma - 1)/2` and in the rescaled clock
:math:`t = 2\\tilde t/(1+\\alpha)`, in which the chemoattractant diffuses and decays at
rate :math:`\\lambda = D = 2/(1+\\alpha)`.
"""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)


class VacuumError(ValueError):
    """The density vanishes or becomes negative somewhere."""


def kappa0_default(alpha: float) -> float:
    """Smallest admissible wave amplitude, :math:`5(1+\\alpha)/\\alpha`."""
    return 5 * (1 + alpha) / alpha


class ModelParams(NamedTuple):
    """Physical and scheme parameters.

    Attributes
    ----------
    gamma
        adiabatic exponent of the pressure law :math:`P(\\rho) = \\rho^\\gamma/\\gamma`.
    beta
        damping coefficient.
    kappa0
        wave amplitude constant.
    epsilon
        slope scale, the initial data has minimal slope :math:`-1/\\varepsilon`.
    M
        bootstrap constant.
    L
        domain half-width.
    N
        number of grid cells on :math:`[-L, L]`.
    cfl
        Courant number.
    blowup_regime
        enforce the amplitude and smallness restrictions of the blow-up regime.
    allow_small_kappa0
        relax the lower bound on `kappa0` in blowup-regime configurations.
    """

    gamma: float = 2.0
    beta: float = 0.0
    kappa0: float = 15.0
    epsilon: float = 0.01
    M: float = 12.0
    L: float = 2.5
    N: int = 8192
    cfl: float = 0.4
    blowup_regime: bool = True
    allow_small_kappa0: bool = False

    @classmethod
    def create(cls, gamma: float = 2.0, kappa0: float | None = None, **kwargs):
        """Build parameters, with ``kappa0 = None`` meaning :func:`kappa0_default`."""
        if kappa0 is None:
            kappa0 = kappa0_default((gamma - 1) / 2)
        return cls(gamma=gamma, kappa0=kappa0, **kwargs).validate()

    @property
    def alpha(self) -> float:
        return (self.gamma - 1) / 2

    @property
    def dx(self) -> float:
        return 2 * self.L / self.N

    @property
    def rate(self) -> float:
        """Diffusion coefficient and decay rate of the chemoattractant, :math:`2/(1+\\alpha)`."""
        return 2 / (1 + self.alpha)

    def validate(self) -> ModelParams:
        if self.gamma <= 1:
            msg = f"gamma must be larger than 1, got {self.gamma}"
            raise ValueError(msg)
        if self.beta < 0:
            msg = f"beta must be nonnegative, got {self.beta}"
            raise ValueError(msg)
        if self.epsilon <= 0 or self.M <= 0 or self.L <= 0:
            msg = "epsilon, M and L must be positive"
            raise ValueError(msg)
        if self.N < 8:
            msg = f"need at least 8 grid cells, got {self.N}"
            raise ValueError(msg)
        if not 0 < self.cfl < 1:
            msg = f"cfl must lie in (0, 1), got {self.cfl}"
            raise ValueError(msg)
        if self.kappa0 <= 0:
            msg = f"kappa0 must be positive, got {self.kappa0}"
            raise ValueError(msg)

        if self.blowup_regime:
            if (
                self.kappa0 < kappa0_default(self.alpha) * (1 - 1e-12)
                and not self.allow_small_kappa0
            ):
                msg = (
                    f"kappa0={self.kappa0} is below 5(1+α)/α={kappa0_default(self.alpha)}; "
                    "set allow_small_kappa0 to run anyway"
                )
                raise ValueError(msg)
            if 8 * self.M * self.epsilon > 1 + 1e-12:
                msg = f"8·M·epsilon = {8 * self.M * self.epsilon} exceeds 1"
                raise ValueError(msg)
        return self


class Background(NamedTuple):
    rho_bar: float
    phi_bar: float
    q_bar: float


class PhysicalState(NamedTuple):
    """Fields on the grid at one instant.

    ``t`` is the rescaled model clock, ``t_orig = (1+α)/2 · t`` the original one.
    """

    t: float
    t_orig: float
    x_grid: np.ndarray
    w: np.ndarray
    z: np.ndarray
    phi: np.ndarray

    @classmethod
    def at(
        cls,
        t: float,
        x_grid: np.ndarray,
        w: np.ndarray,
        z: np.ndarray,
        phi: np.ndarray,
        params: ModelParams,
    ) -> PhysicalState:
        return cls(
            t=t, t_orig=original_time(t, params), x_grid=x_grid, w=w, z=z, phi=phi
        )

    def evolve(self, t: float, w, z, phi, params: ModelParams) -> PhysicalState:
        return PhysicalState.at(t, self.x_grid, w, z, phi, params)


def original_time(t: float, params: ModelParams) -> float:
    return (1 + params.alpha) / 2 * t


def x_grid(params: ModelParams) -> np.ndarray:
    """``N + 1`` uniform nodes on ``[-L, L]``."""
    return np.linspace(-params.L, params.L, params.N + 1)


def background(params: ModelParams) -> Background:
    """Constant equilibrium, :math:`\\bar\\rho = \\bar\\phi = (\\alpha\\kappa_0/2)^{1/\\alpha}`."""
    q_bar = params.kappa0 / 2
    phi_bar = (params.alpha * q_bar) ** (1 / params.alpha)
    return Background(rho_bar=phi_bar, phi_bar=phi_bar, q_bar=q_bar)


def riemann_from_primitive(
    rho: np.ndarray, u: np.ndarray, params: ModelParams
) -> tuple[np.ndarray, np.ndarray]:
    """Convert density and velocity to the Riemann variables ``(w, z)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        bad = np.flatnonzero(np.atleast_1d(rho <= 0))
        msg = f"vacuum: rho <= 0 at {bad.size} node(s), first index {bad[0]}"
        raise VacuumError(msg)
    q = rho**params.alpha / params.alpha
    w = u + q + params.kappa0 / 2
    z = u - q + params.kappa0 / 2
    return w, z


def primitive_from_riemann(
    w: np.ndarray, z: np.ndarray, params: ModelParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convert ``(w, z)`` back to ``(rho, u, q)``."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    q = (w - z) / 2
    if np.any(q <= 0):
        bad = np.flatnonzero(np.atleast_1d(q <= 0))
        msg = f"vacuum: w <= z at {bad.size} node(s), first index {bad[0]}"
        raise VacuumError(msg)
    u = (w + z - params.kappa0) / 2
    rho = (params.alpha * q) ** (1 / params.alpha)
    return rho, u, q


def transport_speeds(
    w: np.ndarray, z: np.ndarray, params: ModelParams
) -> tuple[np.ndarray, np.ndarray]:
    """Characteristic speeds of ``w`` and ``z`` in the rescaled clock."""
    r = (1 - params.alpha) / (1 + params.alpha)
    shift = params.kappa0 / (1 + params.alpha)
    return w + r * z - shift, r * w + z - shift


def chemo_source(q: np.ndarray, params: ModelParams) -> np.ndarray:
    """Production term of the chemoattractant, :math:`\\lambda (\\alpha q)^{1/\\alpha} = \\lambda\\rho`."""
    return params.rate * (params.alpha * q) ** (1 / params.alpha)
