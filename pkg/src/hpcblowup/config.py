"""Run configuration files.

A configuration is a flat list of ``key = value`` lines; ``#`` starts a comment. Numbers
are read as :mod:`pint` quantities, so arithmetic like ``1/64`` or ``5*(1+0.5)/0.5`` is
accepted, but every quantity has to be dimensionless. The keys ``kappa0``,
``stop_slope`` and ``fit_resolution`` also accept ``auto``.

Example ::

    # blow-up regime, gamma = 2
    gamma = 2
    kappa0 = auto
    epsilon = 0.01
    N = 16384
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import NamedTuple

import pint
from importlib_resources import files

from hpcblowup.initial_data import InitialDataSpec
from hpcblowup.model import ModelParams, kappa0_default
from hpcblowup.solver import SolverConfig

log = logging.getLogger(__name__)
u = pint.get_application_registry()

AUTO = "auto"
SWEEP_AXES = ("", "epsilon", "beta", "gamma")


class ConfigError(ValueError):
    """The configuration cannot be parsed or is inconsistent."""


class Key(NamedTuple):
    kind: type
    doc: str
    choices: tuple[str, ...] = ()
    auto: bool = False


SCHEMA: dict[str, Key] = {
    "gamma": Key(float, "adiabatic exponent, gamma > 1"),
    "beta": Key(float, "damping coefficient"),
    "kappa0": Key(float, "wave amplitude; auto = 5(1+α)/α", auto=True),
    "epsilon": Key(float, "slope scale of the initial data"),
    "M": Key(float, "bootstrap constant"),
    "L": Key(float, "domain half-width"),
    "N": Key(int, "number of grid cells"),
    "cfl": Key(float, "Courant number"),
    "blowup_regime": Key(bool, "enforce the blow-up regime restrictions"),
    "allow_small_kappa0": Key(bool, "accept kappa0 below 5(1+α)/α"),
    "phi_method": Key(str, "chemoattractant step", ("imex-central", "duhamel")),
    "transport_scheme": Key(str, "transport derivative", ("weno5", "upwind2")),
    "coupling": Key(str, "system coupling", ("full", "burgers-test")),
    "stop_slope": Key(float, "slope threshold; auto = min(0.2/dx, (4 dx)^(-2/3))", auto=True),
    "snapshot_stride": Key(int, "steps between stored snapshots"),
    "t_limit_factor": Key(float, "time limit in units of epsilon"),
    "modulation": Key(str, "modulation frame", ("empirical", "ode", "both")),
    "cutoff_scale": Key(float, "width of the profile cutoff"),
    "profile_radius": Key(float, "radius on which w0 follows the profile"),
    "z_amplitude": Key(float, "amplitude of z0"),
    "phi_perturbation": Key(float, "amplitude of phi0 - phi_bar"),
    "y_window": Key(float, "half-width of self-similar snapshots"),
    "fit_min_decades": Key(float, "dynamic range required by the rate fit"),
    "fit_resolution": Key(
        float, "rate fit ignores |w_x| dx above this; auto = no cut", auto=True
    ),
    "sweep_axis": Key(str, "parameter varied by sweeps", SWEEP_AXES),
    "sweep_values": Key(tuple, "comma-separated values of the sweep axis"),
}


class Settings(NamedTuple):
    """Fully resolved configuration, see :data:`SCHEMA` for the meaning of each key."""

    gamma: float = 2.0
    beta: float = 0.0
    kappa0: float | None = None
    epsilon: float = 0.01
    M: float = 12.0
    L: float = 2.5
    N: int = 8192
    cfl: float = 0.4
    blowup_regime: bool = True
    allow_small_kappa0: bool = False
    phi_method: str = "imex-central"
    transport_scheme: str = "weno5"
    coupling: str = "full"
    stop_slope: float | None = None
    snapshot_stride: int = 50
    t_limit_factor: float = 2.0
    modulation: str = "both"
    cutoff_scale: float = 1.0
    profile_radius: float = 1.0
    z_amplitude: float = 0.0
    phi_perturbation: float = 0.1
    y_window: float = 1000.0
    fit_min_decades: float = 1.5
    fit_resolution: float | None = None
    sweep_axis: str = ""
    sweep_values: tuple[float, ...] = ()

    @property
    def burgers(self) -> bool:
        return self.coupling == "burgers-test"

    def model_params(self) -> ModelParams:
        """Model parameters; ``burgers-test`` coupling forces ``beta = 0``."""
        kappa0 = self.kappa0
        if kappa0 is None:
            kappa0 = kappa0_default((self.gamma - 1) / 2)
        return ModelParams(
            gamma=self.gamma,
            beta=0.0 if self.burgers else self.beta,
            kappa0=kappa0,
            epsilon=self.epsilon,
            M=self.M,
            L=self.L,
            N=self.N,
            cfl=self.cfl,
            blowup_regime=self.blowup_regime,
            allow_small_kappa0=self.allow_small_kappa0,
        ).validate()

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            params=self.model_params(),
            phi_method=self.phi_method,
            transport_scheme=self.transport_scheme,
            coupling=self.coupling,
            stop_slope=self.stop_slope,
            snapshot_stride=self.snapshot_stride,
            t_limit_factor=self.t_limit_factor,
        ).validate()

    def initial_spec(self) -> InitialDataSpec:
        """Initial-data knobs; ``burgers-test`` coupling forces ``z0 = 0``."""
        return InitialDataSpec(
            params=self.model_params(),
            cutoff_scale=self.cutoff_scale,
            z_amplitude=0.0 if self.burgers else self.z_amplitude,
            phi_perturbation=self.phi_perturbation,
            profile_radius=self.profile_radius,
            decoupled=self.burgers,
        )

    def validate(self) -> Settings:
        """Check cross-key consistency, raising :class:`ConfigError`."""
        try:
            self.solver_config()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.y_window <= 0 or self.fit_min_decades <= 0:
            msg = "y_window and fit_min_decades must be positive"
            raise ConfigError(msg)
        if self.sweep_axis and not self.sweep_values:
            msg = f"sweep axis {self.sweep_axis} declared without sweep_values"
            raise ConfigError(msg)
        return self

    def with_value(self, key: str, value) -> Settings:
        if key not in SCHEMA:
            msg = f"unknown configuration key {key}"
            raise ConfigError(msg)
        return self._replace(**{key: value}).validate()

    def to_text(self) -> str:
        """Serialize all keys, defaults included, in the configuration file format."""
        lines = ["# resolved hpc-blowup configuration"]
        for key, value in self._asdict().items():
            lines.append(f"# {SCHEMA[key].doc}")
            lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"


def _format(value) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _number(text: str, key: str) -> float:
    try:
        quantity = u.Quantity(text)
    except Exception as e:
        msg = f"{key}: cannot parse '{text}' as a number"
        raise ConfigError(msg) from e
    if not quantity.dimensionless:
        msg = f"{key}: '{text}' has units {quantity.units}, expected a dimensionless value"
        raise ConfigError(msg)
    return float(quantity.to("dimensionless").m)


def _convert(key: str, text: str):
    spec = SCHEMA[key]
    if spec.auto and text.lower() == AUTO:
        return None
    if spec.kind is bool:
        if text.lower() in ("true", "yes", "1"):
            return True
        if text.lower() in ("false", "no", "0"):
            return False
        msg = f"{key}: expected true or false, got '{text}'"
        raise ConfigError(msg)
    if spec.kind is str:
        if spec.choices and text not in spec.choices:
            msg = f"{key}: '{text}' is not one of {', '.join(c for c in spec.choices if c)}"
            raise ConfigError(msg)
        return text
    if spec.kind is tuple:
        return tuple(_number(v.strip(), key) for v in text.split(",") if v.strip())
    value = _number(text, key)
    if spec.kind is int:
        if value != int(value):
            msg = f"{key}: expected an integer, got '{text}'"
            raise ConfigError(msg)
        return int(value)
    return value


def parse_config(text: str, base: Settings | None = None) -> Settings:
    """Parse configuration text on top of `base` (the defaults if not given)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            msg = f"line {lineno}: expected 'key = value', got '{raw.strip()}'"
            raise ConfigError(msg)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            msg = f"line {lineno}: unknown configuration key '{key}'"
            raise ConfigError(msg)
        if key in values:
            log.warning("configuration key %s set twice, using the last value", key)
        values[key] = _convert(key, value)

    settings = (base or Settings())._replace(**values)
    return settings.validate()


def load_config(path: str | Path) -> Settings:
    try:
        text = Path(path).read_text()
    except OSError as e:
        msg = f"cannot read configuration {path}: {e}"
        raise ConfigError(msg) from e
    log.debug("loading configuration from %s", path)
    return parse_config(text)


def packaged_config(name: str) -> Settings:
    """Load one of the configurations shipped with the package, e.g. ``blowup_regime``."""
    resource = files("hpcblowup") / "data" / f"{name}.cfg"
    if not resource.is_file():
        msg = f"no packaged configuration named {name}"
        raise ConfigError(msg)
    return parse_config(resource.read_text())
