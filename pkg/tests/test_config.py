from __future__ import annotations

import logging

import pytest

from hpcblowup.config import (
    ConfigError,
    Settings,
    load_config,
    packaged_config,
    parse_config,
)


def test_parse_expressions():
    s = parse_config("epsilon = 1/128\nkappa0 = 5*(1+0.5)/0.5\nN = 4096")
    assert s.epsilon == pytest.approx(1 / 128)
    assert s.kappa0 == pytest.approx(15)
    assert s.N == 4096
    assert isinstance(s.N, int)


def test_auto_values():
    s = parse_config("kappa0 = auto\nstop_slope = AUTO\nfit_resolution = auto")
    assert s.kappa0 is None
    assert s.stop_slope is None
    assert s.fit_resolution is None
    assert s.model_params().kappa0 == pytest.approx(15)


def test_comments_and_blank_lines():
    s = parse_config("# header\n\nbeta = 0.5  # damping\n")
    assert s.beta == 0.5


@pytest.mark.parametrize(
    "text",
    [
        "eps = 0.01",
        "epsilon = 2 m",
        "epsilon = abc",
        "N = 100.5",
        "blowup_regime = maybe",
        "coupling = weak",
        "epsilon 0.01",
        "gamma = 1",
    ],
)
def test_invalid(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_sweep_axis_without_values():
    with pytest.raises(ConfigError, match="sweep_values"):
        parse_config("sweep_axis = epsilon")

    s = parse_config("sweep_axis = epsilon\nsweep_values = 0.01, 0.005, 1/400")
    assert s.sweep_values == pytest.approx((0.01, 0.005, 0.0025))


def test_duplicate_key_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="hpcblowup.config"):
        s = parse_config("beta = 0.1\nbeta = 0.2")
    assert s.beta == 0.2
    assert "set twice" in caplog.text


def test_to_text_round_trip():
    s = Settings(beta=0.25, z_amplitude=0.05, sweep_axis="gamma", sweep_values=(1.5, 2.0))
    assert parse_config(s.to_text()) == s
    assert parse_config(Settings().to_text()) == Settings()


def test_with_value():
    s = Settings().with_value("epsilon", 0.005)
    assert s.epsilon == 0.005
    with pytest.raises(ConfigError):
        Settings().with_value("nope", 1)
    with pytest.raises(ConfigError):
        Settings().with_value("N", 2)


def test_burgers_coupling_forces_decoupling():
    s = parse_config("coupling = burgers-test\nbeta = 0.5\nz_amplitude = 0.1")
    assert s.burgers
    assert s.model_params().beta == 0
    assert s.initial_spec().z_amplitude == 0
    assert s.initial_spec().decoupled


def test_packaged():
    regime = packaged_config("blowup_regime")
    assert regime.N == 16384
    assert regime.M == 12
    assert regime.fit_min_decades == 0.1
    assert regime.L == 1.25
    assert not regime.initial_spec().decoupled
    assert regime.modulation == "both"

    burgers = packaged_config("burgers_test")
    assert burgers.burgers
    assert burgers.L == 0.2
    assert burgers.fit_min_decades == 0.3
    assert burgers.modulation == "empirical"

    with pytest.raises(ConfigError):
        packaged_config("missing")


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epsilon = 0.005\n")
    assert load_config(path).epsilon == 0.005
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")
