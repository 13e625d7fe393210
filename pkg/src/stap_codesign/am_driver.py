# coding=utf-8
"""
Alternating minimization of w^H R_u(s) w over the receive filter w and the waveform s.

Iteration 0 holds the initial waveform s_0 and its Capon filter w_0. Every later
iteration k runs the waveform step s_k = solver(w_{k-1}) followed by the receive step
w_k = mvdr(s_k), so the objective chain

    f(w_0, s_0) >= f(w_0, s_1) >= f(w_1, s_1) >= f(w_1, s_2) >= ...

is recorded in full and can be audited for monotone descent.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist
from tqdm import tqdm

from .const import MULTIPLIER_MODE
from .exceptions import StapCodesignException, IterationException, InfeasibleException
from .matrix_ops import ComplexVector, TAU_ZERO, as_complex
from .radar_model import ScenarioConfig, CovarianceBundle, build_covariance_bundle, clutter_form
from .receiver import mvdr_update
from .waveform_solvers import FEASIBILITY_SLACK, get_solver, scale_solution

_logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9
REPLAY_TOL = 1e-12
STATIONARY_TOL = 1e-6


@dataclass
class RunOptions:
    """
    Options of one alternating minimization run.

    seed defaults to the scenario seed. trial selects an independent random stream
    for the same seed, so every solver run with the same (seed, trial) starts from
    the same waveform.
    """
    max_iter: int = 20
    obj_tol: float = 0.0
    lambda_mode: str = MULTIPLIER_MODE.ROOT
    rescale: bool = False
    init_waveform: Optional[ComplexVector] = None
    drift_samples: int = 64
    seed: Optional[int] = None
    trial: Optional[int] = None
    progress: bool = False


@dataclass
class IterateRecord:
    iteration: int
    w: ComplexVector
    s: ComplexVector
    objective: float
    clutter_objective: float
    power: float
    capon_residual: float
    multiplier: Optional[float] = None
    step_w: Optional[float] = None
    step_s: Optional[float] = None
    drift: Optional[float] = None
    half_step_objective: Optional[float] = None
    half_step_capon_residual: Optional[float] = None
    kkt_residual: Optional[float] = None
    rescaled_objective: Optional[float] = None
    rescaled_clutter_objective: Optional[float] = None
    rescaled_power: Optional[float] = None


@dataclass
class IterateTrace:
    solver: str
    lambda_mode: str
    rescaled: bool
    seed: Optional[int]
    kappa: float
    P_o: float
    trial: Optional[int] = None
    records: List[IterateRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def objectives(self) -> List[float]:
        return [r.objective for r in self.records]

    def half_step_sequence(self) -> List[float]:
        """
        f(w_0, s_0), f(w_0, s_1), f(w_1, s_1), f(w_1, s_2), ...
        """
        res = []
        for record in self.records:
            if record.half_step_objective is not None:
                res.append(record.half_step_objective)
            res.append(record.objective)
        return res


@dataclass
class RunReport:
    trace: IterateTrace
    converged: bool
    final_objective: float
    monotonicity_violations: int
    hull_diameter_w: float
    hull_diameter_s: float
    max_constraint_drift: Optional[float]
    stationary: bool
    final_sinr: float
    final_rescaled_objective: Optional[float] = None


def full_objective(bundle: CovarianceBundle, w: ComplexVector, s: ComplexVector) -> float:
    """
    w^H R_u(s) w = w^H R_c(s) w + w^H (R_n + R_i) w.
    """
    constant = float(np.real(np.vdot(w, bundle.R_ni @ w)))
    return clutter_form(bundle.clutter_ops, w, s) + constant


def initial_waveform(N: int, power: float, rng: np.random.Generator) -> ComplexVector:
    """
    Complex standard normal waveform scaled to ||s||^2 = power.
    """
    s = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    return s * np.sqrt(power) / np.linalg.norm(s)


def seeded_generators(seed: int, trial: Optional[int] = None):
    """
    Independent generators (initial waveform, drift sampling) for a seed and optional trial index.
    """
    spawn_key = () if trial is None else (int(trial),)
    init_seq, drift_seq = np.random.SeedSequence(seed, spawn_key=spawn_key).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(drift_seq)


def hull_diameter(points: Sequence[ComplexVector]) -> float:
    """
    Largest pairwise Euclidean distance of a finite set of complex vectors, which
    is also the diameter of its convex hull.
    """
    stacked = np.asarray([np.asarray(p, dtype=complex).ravel() for p in points])
    if stacked.shape[0] < 2:
        return 0.0
    return float(np.max(pdist(np.hstack([stacked.real, stacked.imag]))))


def _constraint_set_geometry(y: ComplexVector, kappa: float, P_o: float):
    y = as_complex(y, "y").ravel()
    norm2 = float(np.real(np.vdot(y, y)))
    if np.sqrt(norm2) <= TAU_ZERO:
        raise InfeasibleException("Constraint set of a zero steering vector is empty")
    r2 = P_o - kappa ** 2 / norm2
    if r2 < -FEASIBILITY_SLACK * P_o:
        raise InfeasibleException("kappa^2/||y||^2 = {:.6e} exceeds P_o = {:.6e}".format(kappa ** 2 / norm2, P_o))
    if r2 <= FEASIBILITY_SLACK * P_o:
        r2 = 0.0
    return y, norm2, kappa * y / norm2, np.sqrt(r2)


def project_onto_constraint_set(points: np.ndarray, y: ComplexVector, kappa: float, P_o: float) -> np.ndarray:
    """
    Euclidean projection of each row of points onto {s : s^H y = kappa, ||s||^2 <= P_o},
    a disk of radius r = sqrt(P_o - kappa^2/||y||^2) centered at kappa y/||y||^2 inside
    the hyperplane.
    """
    y, norm2, center, radius = _constraint_set_geometry(y, kappa, P_o)
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    on_plane = points - np.outer((points @ y.conj() - kappa) / norm2, y)
    offset = on_plane - center
    dist = np.linalg.norm(offset, axis=1)
    factor = np.where(dist > radius, radius / np.maximum(dist, TAU_ZERO), 1.0)
    return center + offset * factor[:, np.newaxis]


def _sample_constraint_set(y: ComplexVector, kappa: float, P_o: float, samples: int,
                           rng: np.random.Generator) -> np.ndarray:
    """
    The disk center plus samples points on its rim. The distance to a convex set is
    convex, so its maximum over the disk is reached on the rim.
    """
    y, norm2, center, radius = _constraint_set_geometry(y, kappa, P_o)
    basis = scipy.linalg.null_space(y.conj()[np.newaxis, :])
    if basis.shape[1] == 0 or radius == 0 or samples <= 0:
        return center[np.newaxis, :]
    coeffs = rng.standard_normal((samples, basis.shape[1])) + 1j * rng.standard_normal((samples, basis.shape[1]))
    coeffs /= np.linalg.norm(coeffs, axis=1)[:, np.newaxis]
    rim = center + radius * (coeffs @ basis.T)
    return np.vstack([center[np.newaxis, :], rim])


def constraint_set_drift(y_prev: ComplexVector, y_curr: ComplexVector, kappa: float, P_o: float,
                         samples: int = 64, rng: Optional[np.random.Generator] = None) -> float:
    """
    Sampled estimate of the Hausdorff distance between the waveform constraint sets
    {s : s^H y_prev = kappa, ||s||^2 <= P_o} and {s : s^H y_curr = kappa, ||s||^2 <= P_o}.

    Points are drawn on each set and their distance to the other set is computed with
    the exact projection. The estimate never exceeds the true distance.

    :param samples: Number of rim points drawn on each set.
    :param rng: Random generator, a fresh default one when None.
    :return: The estimate.
    """
    if rng is None:
        rng = np.random.default_rng()
    a = _sample_constraint_set(y_prev, kappa, P_o, samples, rng)
    b = _sample_constraint_set(y_curr, kappa, P_o, samples, rng)
    a_to_b = np.linalg.norm(a - project_onto_constraint_set(a, y_curr, kappa, P_o), axis=1)
    b_to_a = np.linalg.norm(b - project_onto_constraint_set(b, y_prev, kappa, P_o), axis=1)
    return float(max(np.max(a_to_b), np.max(b_to_a)))


def _capon_residual(bundle: CovarianceBundle, w: ComplexVector, s: ComplexVector, kappa: float) -> float:
    return float(abs(np.vdot(w, bundle.G @ s) - kappa))


def _receive_step(bundle: CovarianceBundle, s: ComplexVector, kappa: float, iteration: int) -> ComplexVector:
    try:
        return mvdr_update(bundle.total_cov(s), bundle.G, s, kappa)
    except StapCodesignException as e:
        raise IterationException(iteration, e) from e


def _make_record(bundle: CovarianceBundle, iteration: int, w: ComplexVector, s: ComplexVector,
                 kappa: float, P_o: float, rescale: bool) -> IterateRecord:
    clutter = clutter_form(bundle.clutter_ops, w, s)
    record = IterateRecord(iteration=iteration, w=w, s=s,
                           objective=full_objective(bundle, w, s),
                           clutter_objective=clutter,
                           power=float(np.real(np.vdot(s, s))),
                           capon_residual=_capon_residual(bundle, w, s, kappa))
    if rescale:
        try:
            w_r, s_r = scale_solution(w, s, P_o)
        except StapCodesignException as e:
            raise IterationException(iteration, e) from e
        record.rescaled_objective = full_objective(bundle, w_r, s_r)
        record.rescaled_clutter_objective = clutter_form(bundle.clutter_ops, w_r, s_r)
        record.rescaled_power = float(np.real(np.vdot(s_r, s_r)))
    return record


def count_monotonicity_violations(sequence: Sequence[float], slack: float = MONOTONE_SLACK) -> int:
    """
    Number of steps where the sequence increases by more than slack relative to the previous value.
    """
    return sum(1 for prev, curr in zip(sequence, sequence[1:]) if curr > prev + slack * abs(prev))


def run(cfg: ScenarioConfig, solver: str, opts: Optional[RunOptions] = None,
        bundle: Optional[CovarianceBundle] = None) -> RunReport:
    """
    Alternating minimization on a scenario.

    :param cfg: Scenario.
    :param solver: Waveform solver kind, one of SOLVER_KIND.ALL.
    :param opts: Run options, defaults when None.
    :param bundle: Prebuilt covariance bundle of cfg, built when None.
    :return: The run report with the full trace.
    """
    opts = opts if opts is not None else RunOptions()
    if opts.max_iter < 0:
        raise ValueError("max_iter must be >= 0, got {}".format(opts.max_iter))
    waveform_solver = get_solver(solver, opts.lambda_mode)
    if bundle is None:
        bundle = build_covariance_bundle(cfg)
    seed = cfg.seed if opts.seed is None else opts.seed
    init_rng, drift_rng = seeded_generators(seed, opts.trial)
    kappa, P_o = cfg.kappa, cfg.power

    if opts.init_waveform is not None:
        s = as_complex(opts.init_waveform, "init_waveform").ravel()
    else:
        s = initial_waveform(cfg.N, P_o, init_rng)
    w = _receive_step(bundle, s, kappa, 0)
    trace = IterateTrace(solver=solver, lambda_mode=opts.lambda_mode, rescaled=opts.rescale, seed=seed,
                         kappa=kappa, P_o=P_o, trial=opts.trial)
    trace.records.append(_make_record(bundle, 0, w, s, kappa, P_o, opts.rescale))
    _logger.info("Running %s (%s multiplier) for up to %d iterations", solver, opts.lambda_mode, opts.max_iter)

    converged = False
    for k in tqdm(range(1, opts.max_iter + 1), disable=not opts.progress, desc=solver):
        y_prev = bundle.G.conj().T @ w
        try:
            solution = waveform_solver.solve(bundle.waveform_hessian(w), y_prev, kappa, P_o)
        except StapCodesignException as e:
            raise IterationException(k, e) from e
        s_next = solution.s
        half_step = full_objective(bundle, w, s_next)
        half_step_residual = _capon_residual(bundle, w, s_next, kappa)
        w_next = _receive_step(bundle, s_next, kappa, k)

        record = _make_record(bundle, k, w_next, s_next, kappa, P_o, opts.rescale)
        record.multiplier = solution.multiplier
        record.kkt_residual = solution.kkt_residual
        record.half_step_objective = half_step
        record.half_step_capon_residual = half_step_residual
        record.step_w = float(np.linalg.norm(w_next - w))
        record.step_s = float(np.linalg.norm(s_next - s))
        try:
            record.drift = constraint_set_drift(y_prev, bundle.G.conj().T @ w_next, kappa, P_o,
                                                opts.drift_samples, drift_rng)
        except InfeasibleException:
            # zero multiplier mode can leave the power budget behind
            record.drift = None
        trace.records.append(record)
        _logger.debug("iter %d: objective=%.10e half step=%.10e power=%.6e multiplier=%.6e",
                      k, record.objective, half_step, record.power, solution.multiplier)

        previous = trace.records[-2].objective
        w, s = w_next, s_next
        if abs(previous - record.objective) <= opts.obj_tol * abs(previous):
            converged = True
            _logger.info("Converged after %d iterations", k)
            break

    return _report(trace, converged)


def _report(trace: IterateTrace, converged: bool) -> RunReport:
    last = trace.records[-1]
    drifts = [r.drift for r in trace.records if r.drift is not None]
    stationary = (last.kkt_residual is not None and last.kkt_residual <= STATIONARY_TOL
                  and last.step_w <= STATIONARY_TOL and last.step_s <= STATIONARY_TOL)
    report = RunReport(trace=trace,
                       converged=converged,
                       final_objective=last.objective,
                       monotonicity_violations=count_monotonicity_violations(trace.half_step_sequence()),
                       hull_diameter_w=hull_diameter([r.w for r in trace.records]),
                       hull_diameter_s=hull_diameter([r.s for r in trace.records]),
                       max_constraint_drift=max(drifts) if drifts else None,
                       stationary=bool(stationary),
                       final_sinr=trace.kappa ** 2 / last.objective if last.objective > 0 else float("inf"),
                       final_rescaled_objective=last.rescaled_objective)
    _logger.info("Final objective %.10e after %d iterations (%d monotonicity violations)",
                 report.final_objective, len(trace) - 1, report.monotonicity_violations)
    return report


def functional_relation_check(trace: IterateTrace, cfg: ScenarioConfig, solver: str,
                              opts: Optional[RunOptions] = None,
                              bundle: Optional[CovarianceBundle] = None) -> bool:
    """
    Replay every iteration of a trace from its predecessor and compare.

    w_0 must be the Capon filter of s_0, and for k >= 1 (s_k, w_k) must equal
    (solver(w_{k-1}), mvdr(s_k)) within REPLAY_TOL relative.

    :return: True when every iterate is reproduced.
    """
    if len(trace) < 2:
        raise ValueError("A trace needs at least two records to be replayed")
    opts = opts if opts is not None else RunOptions()
    waveform_solver = get_solver(solver, opts.lambda_mode)
    if bundle is None:
        bundle = build_covariance_bundle(cfg)
    kappa, P_o = cfg.kappa, cfg.power

    def same(expected, actual):
        return np.linalg.norm(expected - actual) <= REPLAY_TOL * max(1.0, np.linalg.norm(expected))

    first = trace.records[0]
    try:
        if not same(mvdr_update(bundle.total_cov(first.s), bundle.G, first.s, kappa), first.w):
            _logger.info("Replay mismatch on the receive filter of iteration 0")
            return False
        for prev, curr in zip(trace.records, trace.records[1:]):
            s = waveform_solver.solve(bundle.waveform_hessian(prev.w), bundle.G.conj().T @ prev.w, kappa, P_o).s
            if not same(s, curr.s):
                _logger.info("Replay mismatch on the waveform of iteration %d", curr.iteration)
                return False
            if not same(mvdr_update(bundle.total_cov(curr.s), bundle.G, curr.s, kappa), curr.w):
                _logger.info("Replay mismatch on the receive filter of iteration %d", curr.iteration)
                return False
    except StapCodesignException as e:
        _logger.info("Replay failed: %s", e)
        return False
    return True
