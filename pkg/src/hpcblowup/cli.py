"""Batch front end: configure, run, diagnose and write plot-ready data files."""

from __future__ import annotations

import argparse
import logging
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np

from hpcblowup import initial_data
from hpcblowup.bootstrap import bootstrap_margins
from hpcblowup.burgers import check_profile_properties, profile_grid, profile_table
from hpcblowup.config import ConfigError, Settings, load_config, packaged_config
from hpcblowup.diagnostics import diagnose
from hpcblowup.model import PhysicalState, VacuumError, primitive_from_riemann
from hpcblowup.modulation import (
    ModulationSeries,
    ModulationTracker,
    compare_frames,
    empirical_series,
    selfsimilar_series,
)
from hpcblowup.solver import NormSeries, RunTrace, SlopeSeries, run_until_blowup
from hpcblowup.utils import read_json, read_table, write_json, write_records, write_table

log = logging.getLogger(__name__)

Modes = Literal["simulate", "diagnose", "profile-check", "initial-check", "sweep"]
MODES = ("simulate", "diagnose", "profile-check", "initial-check", "sweep")

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_CONSTRAINT = 3
EXIT_INSTABILITY = 4

SNAPSHOT_COLUMNS = ["x", "w", "z", "phi", "rho", "u"]
SWEEP_COLUMNS = [
    "value",
    "status",
    "exit_code",
    "epsilon",
    "T_star_est",
    "T_star_over_epsilon",
    "T_star_extrapolated",
    "x_star_est",
    "rate_exponent",
    "cusp_exponent",
    "worst_margin",
    "n_violations",
]


class RunManifest(NamedTuple):
    """What to run and where to put it.

    Attributes
    ----------
    config
        configuration file; the packaged ``blowup_regime`` configuration if not given.
        In ``diagnose`` mode the ``config.cfg`` of the run directory is used instead.
    out
        output directory.
    mode
        pipeline to execute.
    force
        continue past failed blocking initial-data constraints.
    jobs
        worker processes for sweeps.
    """

    config: Path | None
    out: Path
    mode: Modes = "simulate"
    force: bool = False
    jobs: int = 1


class ConstraintFailure(RuntimeError):
    """Blocking initial-data constraints failed."""


def _settings(manifest: RunManifest) -> Settings:
    if manifest.mode == "diagnose" and manifest.config is None:
        return load_config(manifest.out / "config.cfg")
    if manifest.config is None:
        return packaged_config("blowup_regime")
    return load_config(manifest.config)


def _initial_state(settings: Settings) -> PhysicalState:
    """Build the initial data; domain problems become :class:`ConfigError`."""
    try:
        return initial_data.build(settings.initial_spec())
    except initial_data.ConstructionError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _staging(out: Path) -> Path:
    out.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))


def _publish(staging: Path, out: Path) -> None:
    if out.exists():
        log.warning("overwriting existing output directory %s", out)
        shutil.rmtree(out)
    staging.rename(out)


def write_trace(directory: Path, trace: RunTrace) -> None:
    """Write the slope and norm series and every stored snapshot of a run."""
    params = trace.params
    write_table(
        directory / "slope_series.csv", ["t", "min_wx", "argmin_x"], np.column_stack(trace.slope_series)
    )
    write_table(
        directory / "norms.csv",
        list(NormSeries._fields),
        np.column_stack(trace.norm_series),
    )

    snapdir = directory / "snapshots"
    snapdir.mkdir()
    index = []
    for i, snap in enumerate(trace.snapshots):
        try:
            rho, u, _ = primitive_from_riemann(snap.w, snap.z, params)
        except VacuumError:
            rho = u = np.full_like(snap.w, np.nan)
        write_table(
            snapdir / f"{i:04d}.csv",
            SNAPSHOT_COLUMNS,
            np.column_stack([snap.x_grid, snap.w, snap.z, snap.phi, rho, u]),
        )
        index.append((i, snap.t, snap.t_orig))
    write_table(snapdir / "index.csv", ["index", "t", "t_orig"], np.array(index))


def read_trace(directory: Path, settings: Settings) -> RunTrace:
    """Rebuild a run from the files of a simulate directory."""
    params = settings.model_params()
    summary = read_json(directory / "summary.json")
    _, slope = read_table(directory / "slope_series.csv")
    _, norms = read_table(directory / "norms.csv")
    _, index = read_table(directory / "snapshots" / "index.csv")

    snapshots = []
    for i, t, _ in index:
        _, data = read_table(directory / "snapshots" / f"{int(i):04d}.csv")
        x, w, z, phi = data[:, :4].T
        snapshots.append(PhysicalState.at(float(t), x, w, z, phi, params))
    return RunTrace(
        snapshots=snapshots,
        slope_series=SlopeSeries(*slope.T),
        norm_series=NormSeries(*norms.T),
        stop_reason=summary["stop_reason"],
        params=params,
        steps=int(summary["steps"]),
        error=summary.get("error", ""),
    )


def _write_series(path: Path, series: ModulationSeries) -> None:
    names, columns = series.table()
    write_table(path, names, columns)


def _frame(settings: Settings, trace: RunTrace, tracker: ModulationTracker | None):
    """The frame used by the diagnostics, and the ODE frame when one was tracked."""
    ode = tracker.series() if tracker is not None else None
    if settings.modulation == "ode" and ode is not None and len(ode) >= 2:
        return ode, ode
    if settings.modulation == "ode":
        log.warning("ODE modulation frame unavailable, falling back to the empirical frame")
    return empirical_series(trace), ode


def _diagnostics(directory: Path, settings: Settings, trace: RunTrace, series) -> dict:
    params = trace.params
    selfsim = selfsimilar_series(trace, series, settings.y_window, params)
    report = diagnose(
        trace, series, selfsim, params, settings.fit_min_decades, settings.fit_resolution
    )
    margins = [m for mod, snap in selfsim.frames for m in bootstrap_margins(snap, mod, params)]
    write_records(directory / "bootstrap_margins.csv", margins)
    write_json(
        directory / "diagnostics.json",
        report._asdict() | {"rate_exponent": report.rate_exponent, "cusp_exponent": report.cusp_exponent},
    )
    return {
        "T_star_est": report.T_star_est,
        "T_star_uncertainty": report.T_star_uncertainty,
        "T_star_extrapolated": report.T_star_extrapolated,
        "T_star_over_epsilon": report.T_star_est / params.epsilon,
        "x_star_est": report.x_star_est,
        "rate_exponent": report.rate_exponent,
        "rate_exponent_uncertainty": report.rate.exponent_uncertainty if report.rate else None,
        "rate_exponent_free": report.rate.free_exponent if report.rate else None,
        "T_star_free": report.rate.free_t_star if report.rate else None,
        "cusp_exponent": report.cusp_exponent,
        "gradient_exponent": report.cusp.gradient_exponent if report.cusp else None,
        "worst_margin": max((m.margin for m in margins), default=None),
        "n_violations": len(report.bootstrap_violations),
        "notes": report.notes,
    }


def simulate(directory: Path, settings: Settings, force: bool = False) -> tuple[int, dict]:
    """Build, validate, run and diagnose one configuration, writing into `directory`.

    Returns the exit status and the summary that was written to ``summary.json``.
    Diagnostics that fail end up in the notes of the summary with
    :data:`EXIT_FAILED_CHECK`; the run data stays in `directory`.

    Raises
    ------
    ConstraintFailure
        if blocking initial-data constraints fail and `force` is not set.
    """
    params = settings.model_params()
    (directory / "config.cfg").write_text(settings.to_text())

    initial = _initial_state(settings)
    report = initial_data.validate(initial, params)
    write_json(directory / "validation.json", report.to_json())
    for cid in report.failed():
        log.warning("initial-data constraint %s not satisfied", cid)
    blocking = report.blocking_failures()
    if blocking and not force:
        msg = f"blocking initial-data constraints failed: {', '.join(blocking)}"
        raise ConstraintFailure(msg)

    tracker = ModulationTracker(params) if settings.modulation in ("ode", "both") else None
    trace = run_until_blowup(initial, settings.solver_config(), observer=tracker)
    write_trace(directory, trace)

    summary = {
        "stop_reason": trace.stop_reason,
        "steps": trace.steps,
        "t_stop": float(trace.final.t),
        "t_stop_orig": float(trace.final.t_orig),
        "min_wx": float(trace.slope_series.min_wx[-1]),
        "error": trace.error,
        "blocking_failures": blocking,
        "advisory_failures": [cid for cid in report.failed() if cid not in blocking],
    }
    if trace.stop_reason == "instability":
        write_json(directory / "summary.json", summary)
        return EXIT_INSTABILITY, summary

    series, ode = _frame(settings, trace, tracker)
    _write_series(directory / "modulation.csv", series)
    if ode is not None and ode is not series:
        _write_series(directory / "modulation_ode.csv", ode)
        if len(series) and len(ode) >= 2:
            gap = compare_frames(series, ode)
            summary["frame_gap"] = {"tau": gap.max_tau_gap, "xi": gap.max_xi_gap}
    if tracker is not None and tracker.lost:
        summary["ode_frame_lost"] = tracker.reason

    code = EXIT_OK
    try:
        summary |= _diagnostics(directory, settings, trace, series)
    except (ValueError, RuntimeError) as e:
        log.error("diagnostics failed: %s", e)
        summary["notes"] = [f"diagnostics: {e}"]
        code = EXIT_FAILED_CHECK
    write_json(directory / "summary.json", summary)
    return code, summary


def rediagnose(directory: Path, settings: Settings) -> int:
    """Recompute ``diagnostics.json`` of a finished simulate directory in place."""
    trace = read_trace(directory, settings)
    if trace.stop_reason == "instability":
        log.error("run in %s ended with an instability, nothing to diagnose", directory)
        return EXIT_INSTABILITY
    _, table = read_table(directory / "modulation.csv")
    method = "ode" if settings.modulation == "ode" else "empirical"
    series = ModulationSeries(*table.T, method=method)

    staging = _staging(directory)
    code = EXIT_OK
    summary = read_json(directory / "summary.json")
    try:
        try:
            summary |= _diagnostics(staging, settings, trace, series)
        except (ValueError, RuntimeError) as e:
            log.error("diagnostics failed: %s", e)
            summary["notes"] = [f"diagnostics: {e}"]
            code = EXIT_FAILED_CHECK
        write_json(staging / "summary.json", summary)
        for f in staging.iterdir():
            f.replace(directory / f.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return code


def profile_check(directory: Path) -> int:
    report = check_profile_properties(profile_grid())
    write_json(directory / "profile_check.json", report)
    sample = profile_table(profile_grid(1e3, 2001))
    write_table(directory / "profile.csv", sample.column_names(), np.column_stack([sample.y, *sample.values]))
    if not report.all_passed():
        log.error("profile properties violated: %s", ", ".join(report.failed()))
        return EXIT_FAILED_CHECK
    return EXIT_OK


def initial_check(directory: Path, settings: Settings, force: bool = False) -> int:
    (directory / "config.cfg").write_text(settings.to_text())
    state = _initial_state(settings)
    report = initial_data.validate(state, settings.model_params())
    write_json(directory / "validation.json", report.to_json())
    blocking = report.blocking_failures()
    if blocking and not force:
        log.error("blocking initial-data constraints failed: %s", ", ".join(blocking))
        return EXIT_CONSTRAINT
    return EXIT_OK


def _sweep_job(directory: Path, settings: Settings, force: bool) -> dict:
    directory.mkdir()
    try:
        code, summary = simulate(directory, settings, force)
    except Exception as e:
        log.error("sweep job in %s failed: %s", directory.name, e)
        return {"status": f"failed: {e}", "exit_code": EXIT_FAILED_CHECK}
    status = {EXIT_OK: "ok", EXIT_FAILED_CHECK: "diagnostics-failed"}.get(code, summary["stop_reason"])
    return summary | {"status": status, "exit_code": code}


def _column(rows: list[dict], key: str) -> np.ndarray:
    return np.array([np.nan if r.get(key) is None else r[key] for r in rows], dtype=float)


def sweep(directory: Path, settings: Settings, force: bool = False, jobs: int = 1) -> int:
    """Run one job per value of the sweep axis and aggregate the results.

    Job failures are isolated; their rows keep the status and ``nan`` elsewhere.
    Writes ``sweep.csv`` and ``sweep.json`` with the trend of the worst bootstrap
    margin along the axis.
    """
    axis = settings.sweep_axis
    if not axis:
        log.info("empty sweep axis, running a single simulation")
        return simulate(directory, settings, force)[0]

    values = list(settings.sweep_values)
    cases = [settings.with_value(axis, v)._replace(sweep_axis="", sweep_values=()) for v in values]
    dirs = [directory / f"{axis}_{i:03d}" for i in range(len(values))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_job, d, c, force) for d, c in zip(dirs, cases)]
            results = [f.result() for f in futures]
    else:
        results = [_sweep_job(d, c, force) for d, c in zip(dirs, cases)]

    rows = [
        r | {"value": v, "epsilon": c.epsilon} for v, c, r in zip(values, cases, results)
    ]
    write_records(directory / "sweep.csv", rows, SWEEP_COLUMNS, missing="nan")

    margins = _column(rows, "worst_margin")
    finite = np.isfinite(margins)
    trend = float(np.polyfit(np.array(values)[finite], margins[finite], 1)[0]) if finite.sum() >= 2 else None
    ratios = _column(rows, "T_star_over_epsilon")
    write_json(
        directory / "sweep.json",
        {
            "axis": axis,
            "values": values,
            "status": [r["status"] for r in rows],
            "worst_margin": margins,
            "worst_margin_slope": trend,
            "T_star_over_epsilon": ratios,
            "T_star_over_epsilon_spread": np.nanmax(ratios) / np.nanmin(ratios) - 1
            if np.isfinite(ratios).any()
            else None,
        },
    )
    failed = [r["status"] for r in rows if r["status"] != "ok"]
    if failed:
        log.warning("%d of %d sweep jobs did not finish cleanly", len(failed), len(rows))
    return EXIT_OK


def run(manifest: RunManifest) -> int:
    """Execute the pipeline of `manifest` and return the exit status.

    Output directories are assembled next to their final location and moved into
    place at the end, so an interrupted run never leaves a half-written directory.
    ``diagnose`` mode updates the files of an existing directory instead.
    """
    try:
        settings = _settings(manifest)
    except ConfigError as e:
        log.error("configuration error: %s", e)
        return EXIT_CONFIG

    if manifest.mode == "diagnose":
        return rediagnose(manifest.out, settings)

    staging = _staging(manifest.out)
    code = EXIT_OK
    try:
        if manifest.mode == "profile-check":
            code = profile_check(staging)
        elif manifest.mode == "initial-check":
            code = initial_check(staging, settings, manifest.force)
        elif manifest.mode == "sweep":
            code = sweep(staging, settings, manifest.force, manifest.jobs)
        else:
            code, summary = simulate(staging, settings, manifest.force)
            log.info("run finished: %s", summary["stop_reason"])
    except ConstraintFailure as e:
        log.error("%s", e)
        code = EXIT_CONSTRAINT
    except initial_data.ConstructionError as e:
        log.error("cannot construct initial data: %s", e)
        code = EXIT_CONSTRAINT
    except ConfigError as e:
        log.error("configuration error: %s", e)
        code = EXIT_CONFIG
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    if code == EXIT_CONFIG:
        shutil.rmtree(staging, ignore_errors=True)
    else:
        _publish(staging, manifest.out)
    return code


def blowup_cli(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hpc-blowup",
        description="%(prog)s command line interface",
    )
    parser.add_argument("--config", type=Path, help="configuration file (default: packaged blow-up regime)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--mode", choices=MODES, default="simulate", help="pipeline, default: %(default)s")
    parser.add_argument("--force", action="store_true", help="run despite failed blocking constraints")
    parser.add_argument("--jobs", type=int, default=1, help="sweep worker processes, default: %(default)s")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")

    return run(RunManifest(args.config, args.out, args.mode, args.force, args.jobs))
