# coding=utf-8
"""
Experiment harness: scenario and defaults loading, solver comparisons, Monte Carlo
tables and trace output.
"""

import configparser
import contextlib
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from pkg_resources import resource_stream
from tqdm import tqdm

from .am_driver import RunOptions, IterateTrace, run
from .const import SOLVER_KIND, MULTIPLIER_MODE, TRACE_FORMAT
from .exceptions import StapCodesignException, ValidationException, ScenarioParseException, \
    ScenarioValidationException, UnsupportedSolverException, TraceIOException
from .radar_model import ScenarioConfig, TargetConfig, InterfererConfig, ClutterConfig, build_covariance_bundle

_logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iter", "objective", "clutter_objective", "power", "capon_residual", "multiplier",
                 "step_w", "step_s", "drift", "rescaled_objective"]
TABLE_COLUMNS = ["label", "mean_final_objective", "std_final_objective", "standard_error", "trials", "failed"]

_TRACE_FIELDS = {"iter": "iteration", "step_w": "step_w", "step_s": "step_s"}


def _number(section: dict, key: str, field_name: str, default, kind=float):
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationException(field_name, "must be a number, got {!r}".format(value))
    if kind is int:
        if int(value) != value:
            raise ScenarioValidationException(field_name, "must be an integer, got {!r}".format(value))
        return int(value)
    return float(value)


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioValidationException(key, "must be an object")
    return value


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """
    Build and validate a ScenarioConfig from a decoded scenario document. Missing
    fields take the ScenarioConfig defaults.
    """
    if not isinstance(doc, dict):
        raise ScenarioParseException("A scenario must be a JSON object")
    defaults = ScenarioConfig()
    dims = _section(doc, "dims")
    target = _section(doc, "target")
    noise = _section(doc, "noise")
    clutter = _section(doc, "clutter")

    interferers = defaults.interferers
    if "interferers" in doc:
        if not isinstance(doc["interferers"], list):
            raise ScenarioValidationException("interferers", "must be a list")
        parsed = []
        for item in doc["interferers"]:
            if not isinstance(item, dict):
                raise ScenarioValidationException("interferers", "every interferer must be an object")
            base = InterfererConfig()
            parsed.append(InterfererConfig(
                azimuth=_number(item, "azimuth", "interferers.azimuth", base.azimuth),
                elevation=_number(item, "elevation", "interferers.elevation", base.elevation),
                phase_rate=_number(item, "phase_rate", "interferers.phase_rate", base.phase_rate),
                power=_number(item, "power", "interferers.power", base.power)))
        interferers = tuple(parsed)

    span = clutter.get("azimuth_span", list(defaults.clutter.azimuth_span))
    if not isinstance(span, (list, tuple)) or len(span) != 2:
        raise ScenarioValidationException("azimuth_span", "must be a [lo, hi] pair")
    span = tuple(_number({"v": v}, "v", "azimuth_span", None) for v in span)

    cfg = ScenarioConfig(
        M=_number(dims, "M", "M", defaults.M, int),
        N=_number(dims, "N", "N", defaults.N, int),
        L=_number(dims, "L", "L", defaults.L, int),
        target=TargetConfig(
            azimuth=_number(target, "azimuth", "target.azimuth", defaults.target.azimuth),
            elevation=_number(target, "elevation", "target.elevation", defaults.target.elevation),
            doppler=_number(target, "doppler", "target.doppler", defaults.target.doppler)),
        kappa=_number(doc, "kappa", "kappa", defaults.kappa),
        power=_number(doc, "power", "power", defaults.power),
        noise_decay=_number(noise, "decay", "decay", defaults.noise_decay),
        interferers=interferers,
        clutter=ClutterConfig(
            patches=_number(clutter, "patches", "patches", defaults.clutter.patches, int),
            elevation=_number(clutter, "elevation", "clutter.elevation", defaults.clutter.elevation),
            azimuth_span=span,
            patch_power=_number(clutter, "patch_power", "patch_power", defaults.clutter.patch_power),
            doppler_slope=_number(clutter, "doppler_slope", "doppler_slope", defaults.clutter.doppler_slope)),
        seed=_number(doc, "seed", "seed", defaults.seed, int))
    return cfg.validate()


def _decode_scenario(text: str, source: str) -> ScenarioConfig:
    if not text.strip():
        raise ScenarioParseException("Scenario {} is empty".format(source))
    try:
        doc = json.loads(text)
    except ValueError as e:
        raise ScenarioParseException("Scenario {} is not valid JSON: {}".format(source, e))
    return scenario_from_dict(doc)


def load_scenario(path: str) -> ScenarioConfig:
    """
    Load a scenario JSON document.

    :param path: Path of the scenario file.
    :return: The validated scenario.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ScenarioParseException("Cannot read scenario {}: {}".format(path, e))
    _logger.info("Loading scenario from %s", path)
    return _decode_scenario(text, path)


def load_default_scenario() -> ScenarioConfig:
    """
    The bundled airborne scenario: 5 element ULA, 8 pulses of 8 samples, 25 clutter patches.
    """
    with resource_stream(__name__, "data/scenario_airborne_ula.json") as f:
        return _decode_scenario(f.read().decode("utf-8"), "scenario_airborne_ula.json")


@dataclass
class RunDefaults:
    max_iter: int = 20
    obj_tol: float = 0.0
    lambda_mode: str = MULTIPLIER_MODE.ROOT
    rescale: bool = False
    drift_samples: int = 64
    trials: int = 50
    seed: int = 0
    solvers: List[str] = field(default_factory=lambda: list(SOLVER_KIND.ALL))
    format: str = TRACE_FORMAT.CSV


def parse_solver_list(value: str) -> List[str]:
    solvers = [s.strip() for s in value.split(",") if s.strip()]
    for solver in solvers:
        if solver not in SOLVER_KIND.ALL:
            raise UnsupportedSolverException("Solver '{}' is not supported".format(solver))
    return solvers


def load_defaults(path: Optional[str] = None) -> RunDefaults:
    """
    Read the bundled defaults.conf, then the optional user file on top of it.

    :param path: User configuration file with [RUN] and [EXPERIMENT] sections.
    :return: The merged defaults.
    """
    config = configparser.ConfigParser()
    with resource_stream(__name__, "data/defaults.conf") as f:
        config.read_file(io.TextIOWrapper(f, encoding="utf-8"))
    if path is not None:
        if not config.read(path):
            raise ValidationException("Cannot read configuration file {}".format(path))
    try:
        defaults = RunDefaults(
            max_iter=config.getint("RUN", "max_iter"),
            obj_tol=config.getfloat("RUN", "obj_tol"),
            lambda_mode=config.get("RUN", "lambda_mode").strip(),
            rescale=config.getboolean("RUN", "rescale"),
            drift_samples=config.getint("RUN", "drift_samples"),
            trials=config.getint("EXPERIMENT", "trials"),
            seed=config.getint("EXPERIMENT", "seed"),
            solvers=parse_solver_list(config.get("EXPERIMENT", "solvers")),
            format=config.get("EXPERIMENT", "format").strip())
    except (configparser.Error, ValueError) as e:
        raise ValidationException("Invalid configuration: {}".format(e))
    if defaults.lambda_mode not in MULTIPLIER_MODE.ALL:
        raise UnsupportedSolverException("Multiplier mode '{}' is not supported".format(defaults.lambda_mode))
    if defaults.format not in TRACE_FORMAT.ALL:
        raise ValidationException("Output format '{}' is not supported".format(defaults.format))
    return defaults


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    solvers: List[str] = field(default_factory=lambda: list(SOLVER_KIND.ALL))
    lambda_mode: str = MULTIPLIER_MODE.ROOT
    rescale: bool = False
    trials: int = 1
    max_iter: int = 20
    seed: int = 0
    output_path: Optional[str] = None
    obj_tol: float = 0.0
    drift_samples: int = 64
    format: str = TRACE_FORMAT.CSV
    progress: bool = False

    def validate(self) -> "ExperimentSpec":
        if self.trials < 1:
            raise ValidationException("trials must be >= 1, got {}".format(self.trials))
        if not self.solvers:
            raise ValidationException("At least one solver is required")
        for solver in self.solvers:
            if solver not in SOLVER_KIND.ALL:
                raise UnsupportedSolverException("Solver '{}' is not supported".format(solver))
        if self.lambda_mode not in MULTIPLIER_MODE.ALL:
            raise UnsupportedSolverException("Multiplier mode '{}' is not supported".format(self.lambda_mode))
        if self.max_iter < 0:
            raise ValidationException("max_iter must be >= 0, got {}".format(self.max_iter))
        if self.format not in TRACE_FORMAT.ALL:
            raise ValidationException("Output format '{}' is not supported".format(self.format))
        return self


@dataclass
class ComparisonRow:
    label: str
    mean_final_objective: float
    std_final_objective: float
    standard_error: float
    trials: int
    failed: int = 0


@dataclass
class CellFailure:
    trial: int
    solver: str
    error: str


@dataclass
class ComparisonTable:
    rows: List[ComparisonRow] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)

    def row(self, label: str) -> ComparisonRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def variant_label(solver: str, lambda_mode: str, rescaled: bool = False) -> str:
    """
    Table label of a solver variant, e.g. "sdp", "sdp lambda=0", "qcqp rescaled".
    """
    label = solver if lambda_mode == MULTIPLIER_MODE.ROOT else "{} lambda=0".format(solver)
    return "{} rescaled".format(label) if rescaled else label


def _summary_row(label: str, values: List[float], trials: int) -> ComparisonRow:
    n = len(values)
    if n == 0:
        return ComparisonRow(label, math.nan, math.nan, math.nan, 0, trials)
    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return ComparisonRow(label=label, mean_final_objective=float(np.mean(values)), std_final_objective=std,
                         standard_error=std / math.sqrt(n), trials=n, failed=trials - n)


def trace_file_name(solver: str, lambda_mode: str, trial: int, fmt: str) -> str:
    return "{}_{}_trial{:03d}.{}".format(solver, lambda_mode, trial, fmt)


def run_comparison(spec: ExperimentSpec) -> Tuple[Dict[Tuple[str, int], IterateTrace], ComparisonTable]:
    """
    Run every requested solver on every trial. All solvers of a trial start from the
    same waveform, drawn from (seed, trial). A failing (trial, solver) cell is
    recorded and the remaining cells still run.

    :param spec: The experiment.
    :return: Traces keyed by (solver, trial), and the comparison table.
    """
    spec.validate()
    bundle = build_covariance_bundle(spec.scenario)
    traces = {}
    finals = {solver: [] for solver in spec.solvers}
    rescaled = {solver: [] for solver in spec.solvers}
    failures = []
    for trial in tqdm(range(spec.trials), disable=not spec.progress, desc="trials"):
        _logger.info("Trial %d/%d", trial + 1, spec.trials)
        for solver in spec.solvers:
            opts = RunOptions(max_iter=spec.max_iter, obj_tol=spec.obj_tol, lambda_mode=spec.lambda_mode,
                              rescale=spec.rescale, drift_samples=spec.drift_samples, seed=spec.seed, trial=trial)
            try:
                report = run(spec.scenario, solver, opts, bundle)
            except StapCodesignException as e:
                _logger.warning("Trial %d, solver %s failed: %s", trial, solver, e)
                failures.append(CellFailure(trial=trial, solver=solver, error=str(e)))
                continue
            traces[(solver, trial)] = report.trace
            finals[solver].append(report.final_objective)
            if spec.rescale:
                rescaled[solver].append(report.final_rescaled_objective)

    table = ComparisonTable(failures=failures)
    for solver in spec.solvers:
        table.rows.append(_summary_row(variant_label(solver, spec.lambda_mode), finals[solver], spec.trials))
    if spec.rescale:
        for solver in spec.solvers:
            table.rows.append(_summary_row(variant_label(solver, spec.lambda_mode, True), rescaled[solver],
                                           spec.trials))

    if spec.output_path is not None:
        os.makedirs(spec.output_path, exist_ok=True)
        for (solver, trial), trace in sorted(traces.items(), key=lambda item: (item[0][1], item[0][0])):
            emit_trace(trace, os.path.join(spec.output_path,
                                           trace_file_name(solver, spec.lambda_mode, trial, spec.format)), spec.format)
        emit_table(table, os.path.join(spec.output_path, "table.csv"))
    return traces, table


def _format_float(value) -> str:
    return "" if value is None else "{:.17g}".format(value)


def _trace_rows(trace: IterateTrace) -> List[dict]:
    rows = []
    for record in trace.records:
        row = {}
        for column in TRACE_COLUMNS:
            row[column] = getattr(record, _TRACE_FIELDS.get(column, column))
        rows.append(row)
    return rows


@contextlib.contextmanager
def _open_output(path: str):
    if path == "-":
        yield sys.stdout
        return
    try:
        f = open(path, "w", newline="", encoding="utf-8")
    except OSError as e:
        raise TraceIOException("Cannot write {}: {}".format(path, e))
    with f:
        yield f


def emit_trace(trace: IterateTrace, path: str, fmt: str = TRACE_FORMAT.CSV) -> None:
    """
    Write a trace as CSV (one row per iteration, floats with 17 significant digits,
    empty cells for missing values) or JSON (metadata plus the same fields per record).

    :param trace: The trace.
    :param path: Output file, "-" for standard output.
    :param fmt: TRACE_FORMAT.CSV or TRACE_FORMAT.JSON.
    """
    if fmt not in TRACE_FORMAT.ALL:
        raise ValidationException("Output format '{}' is not supported".format(fmt))
    rows = _trace_rows(trace)
    try:
        with _open_output(path) as f:
            if fmt == TRACE_FORMAT.CSV:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(TRACE_COLUMNS)
                for row in rows:
                    writer.writerow([row["iter"]] + [_format_float(row[c]) for c in TRACE_COLUMNS[1:]])
            else:
                doc = {"solver": trace.solver, "lambda_mode": trace.lambda_mode, "rescaled": trace.rescaled,
                       "seed": trace.seed, "trial": trace.trial, "kappa": trace.kappa, "power": trace.P_o,
                       "records": rows}
                json.dump(doc, f, indent=2)
                f.write("\n")
    except OSError as e:
        raise TraceIOException("Cannot write trace to {}: {}".format(path, e))


def emit_table(table: ComparisonTable, path: str) -> None:
    """
    Write a comparison table as CSV.

    :param path: Output file, "-" for standard output.
    """
    try:
        with _open_output(path) as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TABLE_COLUMNS)
            for row in table.rows:
                writer.writerow([row.label, _format_float(row.mean_final_objective),
                                 _format_float(row.std_final_objective), _format_float(row.standard_error),
                                 row.trials, row.failed])
    except OSError as e:
        raise TraceIOException("Cannot write table to {}: {}".format(path, e))
