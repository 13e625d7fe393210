# coding=utf-8
import filecmp
import os
import tempfile
import unittest
from dataclasses import replace

import numpy as np
import numpy.testing as npt

from .am_driver import RunOptions, run, project_onto_constraint_set, functional_relation_check
from .const import SOLVER_KIND, MULTIPLIER_MODE
from .exceptions import IterationException, SingularHessianException
from .harness import ExperimentSpec, load_default_scenario, run_comparison, emit_trace
from .radar_model import build_covariance_bundle, clutter_form
from .waveform_solvers import WaveformProblem, qcqp_solve, sdp_dual_solve, cls_solve, \
    scale_solution, reduced_objective, dropped_constant, cls_system, phase_align


def _random_psd(rng, n, rank):
    x = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return x @ x.conj().T / rank


class TestAirborneScenario(unittest.TestCase):
    """
    Twenty iterations of every solver on the bundled airborne scenario, from one shared start.
    """

    @classmethod
    def setUpClass(cls):
        cls.cfg = load_default_scenario()
        cls.bundle = build_covariance_bundle(cls.cfg)
        cls.reports = {solver: run(cls.cfg, solver, RunOptions(max_iter=20), cls.bundle)
                       for solver in SOLVER_KIND.ALL}

    def test_solvers_coincide(self):
        base = self.reports[SOLVER_KIND.AM_DIRECT].trace.objectives()
        self.assertEqual(21, len(base))
        for solver, report in self.reports.items():
            npt.assert_array_equal(self.reports[SOLVER_KIND.AM_DIRECT].trace.records[0].s,
                                   report.trace.records[0].s)
            npt.assert_allclose(report.trace.objectives(), base, rtol=1e-6, err_msg=solver)

    def test_monotone_descent(self):
        for solver, report in self.reports.items():
            self.assertEqual(0, report.monotonicity_violations, solver)
            sequence = report.trace.half_step_sequence()
            self.assertEqual(41, len(sequence))

    def test_feasibility(self):
        for report in self.reports.values():
            for record in report.trace.records:
                self.assertLessEqual(record.capon_residual, 1e-8)
                self.assertLessEqual(record.power, self.cfg.power + 1e-8)
                if record.iteration > 0:
                    self.assertLessEqual(record.half_step_capon_residual, 1e-8)
                    self.assertGreaterEqual(record.multiplier, 0.0)
                    self.assertLessEqual(record.multiplier * (self.cfg.power - record.power), 1e-6)

    def test_trace_rows(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "trace.csv")
            emit_trace(self.reports[SOLVER_KIND.QCQP].trace, path)
            with open(path) as f:
                self.assertEqual(22, len(f.read().splitlines()))

    def test_replay(self):
        for solver, report in self.reports.items():
            self.assertTrue(functional_relation_check(report.trace, self.cfg, solver, RunOptions(), self.bundle))


class TestZeroMultiplierRegime(unittest.TestCase):
    """
    With P_o = 4 and kappa = 1 the root multiplier vanishes whenever the unconstrained update fits the budget.
    F0(w) is rank deficient on this scenario, so the projected solver is used: its zero multiplier
    update goes through the pseudoinverse.
    """

    def test_root_matches_zero_mode(self):
        cfg = replace(load_default_scenario(), power=4.0)
        bundle = build_covariance_bundle(cfg)
        root = run(cfg, SOLVER_KIND.QCQP, RunOptions(max_iter=20), bundle)
        zero = run(cfg, SOLVER_KIND.QCQP, RunOptions(max_iter=20, lambda_mode=MULTIPLIER_MODE.ZERO), bundle)

        for prev, curr in zip(root.trace.records, root.trace.records[1:]):
            unconstrained = qcqp_solve(bundle.waveform_hessian(prev.w), bundle.G.conj().T @ prev.w, cfg.kappa,
                                       cfg.power, MULTIPLIER_MODE.ZERO)
            if unconstrained.power <= cfg.power * (1 - 1e-12):
                self.assertEqual(0.0, curr.multiplier)
                npt.assert_array_equal(unconstrained.s, curr.s)

        for a, b in zip(root.trace.records[1:], zero.trace.records[1:]):
            if a.multiplier != 0.0:
                break
            npt.assert_array_equal(a.s, b.s)
            npt.assert_array_equal(a.w, b.w)

    def test_direct_update_needs_invertible_hessian(self):
        cfg = load_default_scenario()
        with self.assertRaises(IterationException) as ctx:
            run(cfg, SOLVER_KIND.AM_DIRECT, RunOptions(max_iter=2, lambda_mode=MULTIPLIER_MODE.ZERO))
        self.assertEqual(1, ctx.exception.iteration)
        self.assertIsInstance(ctx.exception.cause, SingularHessianException)


class TestStrongDuality(unittest.TestCase):

    def test_random_instances(self):
        rng = np.random.default_rng(100)
        for _ in range(100):
            F0 = _random_psd(rng, 8, 12)
            y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            P_o = rng.uniform(1.0 / np.vdot(y, y).real, 4.0)
            qcqp = qcqp_solve(F0, y, 1.0, P_o)
            sdp = sdp_dual_solve(F0, y, 1.0, P_o)
            nu = reduced_objective(qcqp.problem, qcqp.problem.P_perp @ qcqp.s)
            self.assertLessEqual(abs(nu - sdp.certificate.dual_value), 1e-6 * (1 + abs(nu)))
            self.assertGreaterEqual(sdp.certificate.gap, -1e-8)
            self.assertEqual(0.0, sdp.certificate.rank1_residual)


class TestBruteForce(unittest.TestCase):
    """
    Multi-start projected gradient on two dimensional instances.
    """

    @staticmethod
    def _projected_gradient(F0, y, P_o, rng, starts=200, steps=10000):
        points = project_onto_constraint_set(
            rng.standard_normal((starts, 2)) + 1j * rng.standard_normal((starts, 2)), y, 1.0, P_o)
        top = np.linalg.eigvalsh(F0)[-1]
        for _ in range(steps):
            points = project_onto_constraint_set(points - points @ F0.T / top, y, 1.0, P_o)
        values = np.einsum("si,ij,sj->s", points.conj(), F0, points).real
        return float(np.min(values))

    def test_two_dimensional(self):
        rng = np.random.default_rng(101)
        for _ in range(20):
            F0 = _random_psd(rng, 2, 2) + 0.1 * np.eye(2)
            y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            P_o = rng.uniform(1.1, 3.0) / np.vdot(y, y).real
            expected = self._projected_gradient(F0, y, P_o, rng)
            sol = qcqp_solve(F0, y, 1.0, P_o)
            self.assertLessEqual(abs(sol.objective - expected), 1e-4 * abs(expected))


class TestScalingIdentity(unittest.TestCase):

    def test_random_pairs(self):
        cfg = load_default_scenario()
        bundle = build_covariance_bundle(cfg)
        rng = np.random.default_rng(102)
        for _ in range(50):
            w = rng.standard_normal(cfg.dim) + 1j * rng.standard_normal(cfg.dim)
            s = rng.standard_normal(cfg.N) + 1j * rng.standard_normal(cfg.N)
            w2, s2 = scale_solution(w, s, cfg.power)
            clutter = clutter_form(bundle.clutter_ops, w, s)
            self.assertLessEqual(abs(clutter_form(bundle.clutter_ops, w2, s2) - clutter), 1e-10 * clutter)
            ratio = np.vdot(w2, bundle.R_ni @ w2).real / np.vdot(w, bundle.R_ni @ w).real
            expected = np.vdot(s, s).real / cfg.power
            self.assertLessEqual(abs(ratio - expected), 1e-10 * expected)
            self.assertLessEqual(abs(np.vdot(s2, s2).real - cfg.power), 1e-12 * cfg.power)


class TestLeastSquaresIdentity(unittest.TestCase):

    def test_random_instances(self):
        rng = np.random.default_rng(103)
        for _ in range(100):
            F0 = _random_psd(rng, 8, 12)
            y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            P_o = rng.uniform(1.0 / np.vdot(y, y).real, 4.0)
            problem = WaveformProblem(F0, y, 1.0, P_o)
            C, d = cls_system(problem)
            q = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            lhs = np.linalg.norm(C @ q - d) ** 2
            rhs = reduced_objective(problem, q) + dropped_constant(problem)
            self.assertLessEqual(abs(lhs - rhs), 1e-10 * abs(rhs))
            cls = cls_solve(F0, y, 1.0, P_o)
            qcqp = qcqp_solve(F0, y, 1.0, P_o)
            self.assertLessEqual(np.linalg.norm(phase_align(cls.s, y) - phase_align(qcqp.s, y)), 1e-5)


class TestMonteCarloOrdering(unittest.TestCase):
    """
    Fifty trials on the bundled scenario:

        mean(rescaled) <= mean(sdp lambda=0, rescaled) <= mean(root mode unscaled)

    each within one standard error of the compared rows.
    """

    @staticmethod
    def _at_most(a, b):
        return a.mean_final_objective <= b.mean_final_objective + max(a.standard_error, b.standard_error)

    def test_ordering(self):
        cfg = load_default_scenario()
        root_traces, root = run_comparison(ExperimentSpec(scenario=cfg, solvers=[SOLVER_KIND.QCQP], trials=50,
                                                          max_iter=20, rescale=True))
        _, zero = run_comparison(ExperimentSpec(scenario=cfg, solvers=[SOLVER_KIND.SDP], trials=50, max_iter=20,
                                                lambda_mode=MULTIPLIER_MODE.ZERO, rescale=True))
        unscaled = root.row("qcqp")
        rescaled = root.row("qcqp rescaled")
        zero_row = zero.row("sdp lambda=0 rescaled")
        for row in (unscaled, rescaled, zero.row("sdp lambda=0"), zero_row):
            self.assertEqual(50, row.trials)
            self.assertEqual(0, row.failed)
            self.assertTrue(np.isfinite(row.mean_final_objective))
        self.assertLessEqual(rescaled.mean_final_objective, unscaled.mean_final_objective)
        self.assertTrue(self._at_most(rescaled, zero_row))
        self.assertTrue(self._at_most(zero_row, unscaled))
        for trace in root_traces.values():
            last = trace.records[-1]
            self.assertLessEqual(last.rescaled_objective, last.objective * (1 + 1e-12))


class TestDeterminism(unittest.TestCase):

    def test_byte_identical_outputs(self):
        cfg = load_default_scenario()
        with tempfile.TemporaryDirectory() as tmp:
            outputs = []
            for name in ("first", "second"):
                out = os.path.join(tmp, name)
                traces, _ = run_comparison(ExperimentSpec(scenario=cfg, trials=2, max_iter=5, seed=9,
                                                          output_path=out))
                outputs.append(out)
            names = sorted(os.listdir(outputs[0]))
            self.assertEqual(names, sorted(os.listdir(outputs[1])))
            self.assertEqual(4 * 2 + 1, len(names))
            _, mismatch, errors = filecmp.cmpfiles(outputs[0], outputs[1], names, shallow=False)
            self.assertEqual([], mismatch)
            self.assertEqual([], errors)
        bundle = build_covariance_bundle(cfg)
        for (solver, _), trace in traces.items():
            self.assertTrue(functional_relation_check(trace, cfg, solver, RunOptions(), bundle))


if __name__ == '__main__':
    unittest.main()
