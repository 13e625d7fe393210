# coding=utf-8
import unittest

import numpy as np
import numpy.testing as npt

from .const import SOLVER_KIND, MULTIPLIER_MODE
from .exceptions import InfeasibleException, SingularHessianException, ZeroSteeringException, \
    ZeroWaveformException, UnsupportedSolverException
from .radar_model import ScenarioConfig, build_clutter_operators, clutter_form
from .waveform_solvers import WaveformProblem, WaveformSolver, direct_update, qcqp_solve, secular_residual, \
    sdp_dual_solve, sdp_certificate, cls_solve, scale_solution, reduced_objective, dropped_constant, \
    dual_function, cls_system, phase_align, get_solver


def random_instance(rng, N=8, rank=12):
    x = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    F0 = x @ x.conj().T / rank
    y = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    return F0, y


def tight_power(F0, y, kappa=1.0):
    """
    A power budget halfway between the Capon minimum and the power of the unconstrained update.
    """
    unconstrained = direct_update(F0, np.eye(len(y)), y, kappa, 1e6, MULTIPLIER_MODE.ZERO).power
    minimum = kappa ** 2 / np.vdot(y, y).real
    return minimum + 0.5 * (unconstrained - minimum)


class TestDirectUpdate(unittest.TestCase):

    def test_identity_hessian(self):
        y = np.array([1.0, 2.0j, -1.0])
        sol = direct_update(np.eye(3), np.eye(3), y, 1.0, 1.0)
        npt.assert_allclose(sol.s, y / np.vdot(y, y).real, atol=1e-12)
        self.assertEqual(0.0, sol.multiplier)

    def test_loose_power_gives_zero_multiplier(self):
        rng = np.random.default_rng(10)
        G = rng.standard_normal((20, 8)) + 1j * rng.standard_normal((20, 8))
        F0, _ = random_instance(rng)
        w = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        w *= 2.0 / np.linalg.norm(G.conj().T @ w)
        sol = direct_update(F0, G, w, 1.0, 2.0)
        if sol.power <= 2.0:
            self.assertEqual(0.0, sol.multiplier)
        zero = direct_update(F0, G, w, 1.0, 2.0, MULTIPLIER_MODE.ZERO)
        if zero.power <= 2.0:
            npt.assert_array_equal(zero.s, sol.s)

    def test_tight_power(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            F0, y = random_instance(rng)
            P_o = tight_power(F0, y)
            sol = direct_update(F0, np.eye(8), y, 1.0, P_o)
            self.assertGreater(sol.multiplier, 0)
            self.assertAlmostEqual(P_o, sol.power, delta=1e-8 * P_o)
            self.assertLessEqual(sol.capon_residual, 1e-10)
            self.assertLessEqual(sol.kkt_residual, 1e-8)

            # grid scan of the power function around the returned multiplier
            lam = sol.multiplier
            grid = np.linspace(0.0, 2.0 * lam, 41)
            powers = [direct_update(F0 + g * np.eye(8), np.eye(8), y, 1.0, 1e6, MULTIPLIER_MODE.ZERO).power
                      for g in grid]
            self.assertTrue(all(p1 >= p2 - 1e-12 for p1, p2 in zip(powers, powers[1:])))
            # lam lies in the grid cell where the power first drops to the budget
            i = int(np.argmax(np.array(powers) <= P_o))
            self.assertGreaterEqual(i, 1)
            slack = 1e-9 * lam
            self.assertLessEqual(grid[i - 1] - slack, lam)
            self.assertLessEqual(lam, grid[i] + slack)

    def test_zero_mode_singular_hessian(self):
        F0 = np.diag([1.0, 0.0, 2.0]).astype(complex)
        with self.assertRaises(SingularHessianException):
            direct_update(F0, np.eye(3), np.ones(3), 1.0, 10.0, MULTIPLIER_MODE.ZERO)

    def test_root_mode_singular_hessian(self):
        F0 = np.diag([1.0, 0.0, 2.0]).astype(complex)
        y = np.ones(3, dtype=complex)
        sol = direct_update(F0, np.eye(3), y, 1.0, 10.0)
        # the null direction of F0 carries the whole waveform
        npt.assert_allclose(sol.s, [0.0, 1.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(0.0, sol.objective, delta=1e-14)

    def test_zero_steering(self):
        with self.assertRaises(ZeroSteeringException):
            direct_update(np.eye(3), np.eye(3), np.zeros(3), 1.0, 1.0)

    def test_infeasible(self):
        with self.assertRaises(InfeasibleException):
            direct_update(np.eye(2), np.eye(2), np.array([0.1, 0.0]), 1.0, 1.0)


class TestQcqp(unittest.TestCase):

    def test_scaled_identity(self):
        y = np.array([1.0, 1.0j, 0.5])
        for c in (0.5, 3.0):
            sol = qcqp_solve(c * np.eye(3), y, 1.0, 4.0)
            npt.assert_allclose(sol.s, y / np.vdot(y, y).real, atol=1e-12)
            self.assertEqual(0.0, sol.multiplier)

    def test_boundary_feasibility(self):
        F0, y = random_instance(np.random.default_rng(12))
        P_o = 1.0 / np.vdot(y, y).real
        for solver in (qcqp_solve, sdp_dual_solve, cls_solve):
            sol = solver(F0, y, 1.0, P_o)
            npt.assert_allclose(sol.s, y / np.vdot(y, y).real, atol=1e-12)

    def test_matches_direct_update(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            F0, y = random_instance(rng)
            P_o = tight_power(F0, y)
            direct = direct_update(F0, np.eye(8), y, 1.0, P_o)
            qcqp = qcqp_solve(F0, y, 1.0, P_o)
            self.assertAlmostEqual(1.0, qcqp.objective / direct.objective, delta=1e-8)
            self.assertAlmostEqual(1.0, qcqp.multiplier / direct.multiplier, delta=1e-6)
            self.assertAlmostEqual(P_o, qcqp.power, delta=1e-8 * P_o)

    def test_infeasible(self):
        with self.assertRaises(InfeasibleException):
            qcqp_solve(np.eye(2), np.array([0.1, 0.0]), 1.0, 1.0)

    def test_zero_mode_ignores_power(self):
        rng = np.random.default_rng(14)
        F0, y = random_instance(rng)
        P_o = tight_power(F0, y)
        sol = qcqp_solve(F0, y, 1.0, P_o, MULTIPLIER_MODE.ZERO)
        self.assertEqual(0.0, sol.multiplier)
        self.assertGreater(sol.power, P_o)
        self.assertLessEqual(sol.capon_residual, 1e-10)


class TestSecularResidual(unittest.TestCase):

    def test_limits(self):
        F0, y = random_instance(np.random.default_rng(15))
        P_o = 2.0
        r2 = P_o - 1.0 / np.vdot(y, y).real
        self.assertAlmostEqual(-r2, secular_residual(F0, y, 1.0, 1e12, P_o), delta=1e-6)
        self.assertAlmostEqual(-r2, secular_residual(np.eye(8), y, 1.0, 0.0, P_o), delta=1e-12)

    def test_nonincreasing(self):
        rng = np.random.default_rng(16)
        F0, y = random_instance(rng)
        P_o = tight_power(F0, y)
        for _ in range(50):
            g1, g2 = np.sort(rng.uniform(0.0, 5.0, 2))
            self.assertGreaterEqual(secular_residual(F0, y, 1.0, g1, P_o),
                                    secular_residual(F0, y, 1.0, g2, P_o) - 1e-12)


class TestSdpDual(unittest.TestCase):

    def test_identity_hessian(self):
        y = np.array([1.0, -1.0j, 2.0])
        sol = sdp_dual_solve(np.eye(3), y, 1.0, 1.0)
        self.assertEqual(0.0, sol.multiplier)
        self.assertAlmostEqual(0.0, sol.certificate.dual_value, delta=1e-12)
        self.assertAlmostEqual(0.0, reduced_objective(sol.problem, sol.problem.P_perp @ sol.s), delta=1e-12)

    def test_strong_duality(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            F0, y = random_instance(rng)
            P_o = tight_power(F0, y)
            qcqp = qcqp_solve(F0, y, 1.0, P_o)
            sol = sdp_dual_solve(F0, y, 1.0, P_o)
            nu = reduced_objective(qcqp.problem, qcqp.problem.P_perp @ qcqp.s)
            cert = sol.certificate
            self.assertLessEqual(abs(cert.dual_value - nu), 1e-6 * (1 + abs(nu)))
            self.assertGreaterEqual(cert.gap, -1e-8)
            self.assertEqual(0.0, cert.rank1_residual)
            self.assertTrue(cert.psd)
            self.assertLessEqual(cert.alpha * (sol.problem.r2 - cert.constraint_value), 1e-6)
            self.assertAlmostEqual(1.0, sol.objective / qcqp.objective, delta=1e-6)

    def test_weak_duality_and_concavity(self):
        rng = np.random.default_rng(18)
        F0, y = random_instance(rng)
        P_o = tight_power(F0, y)
        problem = WaveformProblem(F0, y, 1.0, P_o)
        sol = qcqp_solve(F0, y, 1.0, P_o)
        primal = reduced_objective(problem, problem.P_perp @ sol.s)
        grid = np.linspace(0.0, 4.0 * sol.multiplier + 1.0, 50)
        values = np.array([dual_function(problem, a) for a in grid[1:]])
        self.assertTrue(np.all(values <= primal + 1e-8))
        slopes = np.diff(values) / np.diff(grid[1:])
        tol = 1e-8 * (1 + np.max(np.abs(slopes)))
        self.assertTrue(np.all(np.diff(slopes) <= tol))

    def test_certificate_of_zero_q(self):
        y = np.array([1.0, 0.0, 0.0])
        F0 = np.diag([1.0, 2.0, 3.0]).astype(complex)
        sol = qcqp_solve(F0, y, 1.0, 2.0)
        cert = sdp_certificate(sol)
        self.assertEqual(0.0, cert.rank1_residual)
        self.assertAlmostEqual(0.0, cert.primal_value, delta=1e-14)
        self.assertAlmostEqual(abs(cert.dual_value), cert.gap, delta=1e-14)


class TestCls(unittest.TestCase):

    def test_identity_hessian(self):
        y = np.array([2.0, 1.0j, 0.0, -1.0])
        problem = WaveformProblem(np.eye(4), y, 1.0, 1.0)
        _, d = cls_system(problem)
        self.assertAlmostEqual(1.0 / np.linalg.norm(y), np.linalg.norm(d), delta=1e-12)
        sol = cls_solve(np.eye(4), y, 1.0, 1.0)
        npt.assert_allclose(problem.P_perp @ sol.s, np.zeros(4), atol=1e-12)

    def test_expansion_identity(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            F0, y = random_instance(rng)
            problem = WaveformProblem(F0, y, 1.0, 2.0)
            C, d = cls_system(problem)
            q = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            lhs = np.linalg.norm(C @ q - d) ** 2
            rhs = reduced_objective(problem, q) + dropped_constant(problem)
            self.assertAlmostEqual(1.0, lhs / rhs, delta=1e-10)

    def test_matches_qcqp(self):
        rng = np.random.default_rng(20)
        for _ in range(10):
            F0, y = random_instance(rng)
            P_o = tight_power(F0, y)
            qcqp = qcqp_solve(F0, y, 1.0, P_o)
            cls = cls_solve(F0, y, 1.0, P_o)
            self.assertAlmostEqual(1.0, cls.objective / qcqp.objective, delta=1e-8)
            self.assertLessEqual(np.linalg.norm(phase_align(cls.s, y) - phase_align(qcqp.s, y)), 1e-6)
            self.assertAlmostEqual(1.0, cls.multiplier / qcqp.multiplier, delta=1e-6)


class TestFourWayEquivalence(unittest.TestCase):

    def test_equivalence(self):
        rng = np.random.default_rng(21)
        for trial in range(10):
            F0, y = random_instance(rng)
            P_o = tight_power(F0, y) if trial % 2 else 2.0 * tight_power(F0, y)
            solutions = [get_solver(kind).solve(F0, y, 1.0, P_o) for kind in SOLVER_KIND.ALL]
            base = solutions[0]
            for sol in solutions:
                self.assertAlmostEqual(1.0, sol.objective / base.objective, delta=1e-6)
                self.assertLessEqual(np.linalg.norm(phase_align(sol.s, y) - phase_align(base.s, y)), 1e-5)
                self.assertLessEqual(sol.capon_residual, 1e-8)
                self.assertLessEqual(sol.power, P_o + 1e-8)
                self.assertGreaterEqual(sol.multiplier, 0.0)
                self.assertLessEqual(sol.complementarity, 1e-6 * P_o)

    def test_unknown_solver(self):
        with self.assertRaises(UnsupportedSolverException):
            get_solver("aa2")
        with self.assertRaises(UnsupportedSolverException):
            get_solver(SOLVER_KIND.QCQP, "line-search")

    def test_abstract_solver(self):
        with self.assertRaises(NotImplementedError):
            WaveformSolver().solve(np.eye(2), np.ones(2), 1.0, 4.0)


class TestScaleSolution(unittest.TestCase):

    def test_unchanged_at_full_power(self):
        w = np.array([1.0, 2.0j])
        s = np.array([0.6, 0.8j])
        w2, s2 = scale_solution(w, s, 1.0)
        npt.assert_allclose(w2, w)
        npt.assert_allclose(s2, s)

    def test_zero_waveform(self):
        with self.assertRaises(ZeroWaveformException):
            scale_solution(np.ones(2), np.zeros(2), 1.0)

    def test_scaling_identities(self):
        cfg = ScenarioConfig()
        ops = build_clutter_operators(cfg)
        rng = np.random.default_rng(22)
        R = np.eye(cfg.dim) * 0.5
        for _ in range(10):
            w = rng.standard_normal(cfg.dim) + 1j * rng.standard_normal(cfg.dim)
            s = rng.standard_normal(cfg.N) + 1j * rng.standard_normal(cfg.N)
            w2, s2 = scale_solution(w, s, cfg.power)
            self.assertAlmostEqual(cfg.power, np.vdot(s2, s2).real, delta=1e-12 * cfg.power)
            self.assertAlmostEqual(1.0, clutter_form(ops, w2, s2) / clutter_form(ops, w, s), delta=1e-10)
            ratio = np.vdot(w2, R @ w2).real / np.vdot(w, R @ w).real
            self.assertAlmostEqual(np.vdot(s, s).real / cfg.power, ratio, delta=1e-10 * ratio)


if __name__ == '__main__':
    unittest.main()
