# coding=utf-8
"""
Waveform half-step of the alternating minimization.

For a fixed receive filter w, with y_w = G^H w and F0 = F0(w), the waveform step is

    min_s  s^H F0 s   s.t.  s^H y_w = kappa,  ||s||^2 <= P_o.

Four equivalent solvers are provided:

- direct_update: Lagrange update s = kappa F^-1 y_w / (y_w^H F^-1 y_w), F = F0 + λI,
  with λ found from the power constraint.
- qcqp_solve: projected problem over q, s = P⊥ q(γ) + kappa y_w / ||y_w||^2, with γ
  the root of the secular equation.
- sdp_dual_solve: maximizes the concave dual function g(α) of the projected problem
  and recovers q from the optimal α, with a duality certificate.
- cls_solve: least squares ||C q - d||^2 on a hyperellipsoid, solved with the SVD.

kappa is real, so the Capon constraint w^H G s = kappa and s^H y_w = kappa coincide.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

from .const import SOLVER_KIND, MULTIPLIER_MODE
from .exceptions import ZeroSteeringException, SingularHessianException, InfeasibleException, \
    NumericalFailureException, ZeroWaveformException, UnsupportedSolverException
from .matrix_ops import ComplexMatrix, ComplexVector, TAU_ZERO, TAU_RANK, TAU_PSD, as_complex, \
    check_hermitian, hermitian_part, psd_eigh, hermitian_sqrt, pseudo_inverse, complement_projector, \
    bisect_root

_logger = logging.getLogger(__name__)

# Relative slack under which kappa^2/||y_w||^2 = P_o is treated as the boundary case.
FEASIBILITY_SLACK = 1e-10
# Root finding tolerances on the power residual (relative to P_o) and on the multiplier
# (relative to the spectral norm of F0).
POWER_TOL = 1e-13
MULTIPLIER_XTOL = 1e-14
# Coarse tolerance of the bounded dual search, refined afterwards by bisection.
DUAL_SEARCH_XTOL = 1e-6


class WaveformProblem(object):
    """
    One instance of the waveform step, with the quantities every solver shares.
    """

    def __init__(self, F0: ComplexMatrix, y_w: ComplexVector, kappa: float, P_o: float):
        """
        :param F0: Waveform Hessian (Hermitian PSD, N x N).
        :param y_w: Steering vector G^H w (length N).
        :param kappa: Capon gain (real).
        :param P_o: Power budget.
        """
        F0 = as_complex(F0, "F0")
        check_hermitian(F0)
        self.F0 = hermitian_part(F0)
        self.y_w = as_complex(y_w, "y_w").ravel()
        self.kappa = float(np.real(kappa))
        self.P_o = float(P_o)
        self.norm2 = float(np.real(np.vdot(self.y_w, self.y_w)))
        if np.sqrt(self.norm2) <= TAU_ZERO:
            raise ZeroSteeringException("Steering vector y_w = G^H w is zero")
        self.c = self.kappa / self.norm2
        self.center = self.c * self.y_w
        self.r2 = self.P_o - self.kappa ** 2 / self.norm2
        if abs(self.r2) <= FEASIBILITY_SLACK * self.P_o:
            self.r2 = 0.0
        self.P_perp = complement_projector(self.y_w)
        self.B0 = self.P_perp @ self.F0 @ self.P_perp
        self.b = self.P_perp @ self.F0 @ self.y_w

    @property
    def N(self) -> int:
        return self.y_w.shape[0]

    @property
    def feasible(self) -> bool:
        return self.r2 >= 0

    def check_feasible(self) -> None:
        if not self.feasible:
            raise InfeasibleException("kappa^2/||y_w||^2 = {:.6e} exceeds P_o = {:.6e}".format(
                self.kappa ** 2 / self.norm2, self.P_o))

    def assemble(self, q: ComplexVector) -> ComplexVector:
        """
        Waveform s = P⊥ q + kappa y_w / ||y_w||^2.
        """
        return self.P_perp @ q + self.center


@dataclass
class DualCertificate:
    alpha: float
    beta: float
    dual_value: float
    primal_value: float
    gap: float
    rank1_residual: float
    constraint_value: float
    psd: bool


@dataclass
class WaveformSolution:
    """
    Result of one waveform step. objective is s^H F0 s (the s dependent part of the
    full objective).
    """
    s: ComplexVector
    multiplier: float
    objective: float
    capon_residual: float
    power: float
    kkt_residual: float
    kind: str
    mode: str
    problem: WaveformProblem
    certificate: Optional[DualCertificate] = None

    @property
    def complementarity(self) -> float:
        return self.multiplier * (self.problem.P_o - self.power)


def _finish(problem: WaveformProblem, s: ComplexVector, multiplier: float, kind: str, mode: str) -> WaveformSolution:
    if not np.all(np.isfinite(s)):
        raise NumericalFailureException("{} solver produced a non finite waveform".format(kind))
    power = float(np.real(np.vdot(s, s)))
    objective = float(np.real(np.vdot(s, problem.F0 @ s)))
    capon_residual = float(abs(np.vdot(s, problem.y_w) - problem.kappa))
    stationarity = problem.P_perp @ (problem.F0 @ s + multiplier * s)
    scale = (np.linalg.norm(problem.F0, 2) + multiplier) * np.sqrt(power) + TAU_ZERO
    kkt_residual = float(np.linalg.norm(stationarity) / scale)
    _logger.debug("%s/%s: objective=%.6e power=%.6e multiplier=%.6e", kind, mode, objective, power, multiplier)
    return WaveformSolution(s=s, multiplier=float(multiplier), objective=objective, capon_residual=capon_residual,
                            power=power, kkt_residual=kkt_residual, kind=kind, mode=mode, problem=problem)


def _check_mode(mode: str) -> None:
    if mode not in MULTIPLIER_MODE.ALL:
        raise UnsupportedSolverException("Multiplier mode '{}' is not supported".format(mode))


def phase_align(s: ComplexVector, y_w: ComplexVector) -> ComplexVector:
    """
    Multiply s by the unit phase that makes s^H y_w real and positive.
    """
    inner = np.vdot(s, y_w)
    if abs(inner) <= TAU_ZERO:
        return s
    return s * (inner / abs(inner))


class _HessianSpectrum(object):
    """
    F0 = U diag(e) U^H together with z = U^H y_w, so that (F0 + λI)^-1 y_w is cheap for any λ.
    """

    def __init__(self, problem: WaveformProblem):
        self.e, self.U = psd_eigh(problem.F0)
        self.z = self.U.conj().T @ problem.y_w
        self.z2 = np.abs(self.z) ** 2
        top = self.e[-1] if self.e.size else 0.0
        self.floor = TAU_RANK * top
        self.null = self.e <= self.floor
        self.scale = top if top > 0 else 1.0

    @property
    def singular(self) -> bool:
        return bool(np.any(self.null))

    def coefficients(self, lam: float) -> Tuple[np.ndarray, float]:
        """
        Coordinates x of F^-1 y_w in the eigenbasis and y_w^H F^-1 y_w. At λ = 0 with a
        singular F0 the λ -> 0+ limit is used.
        """
        if lam > 0 or not self.singular:
            d = self.e + lam
            return self.z / d, float(np.sum(self.z2 / d))
        null_weight = float(np.sum(self.z2[self.null]))
        if null_weight > TAU_RANK * float(np.sum(self.z2)):
            return np.where(self.null, self.z, 0.0), null_weight
        safe = np.where(self.null, 1.0, self.e)
        x = np.where(self.null, 0.0, self.z / safe)
        return x, float(np.sum(np.where(self.null, 0.0, self.z2 / safe)))

    def power(self, lam: float, kappa: float) -> float:
        x, den = self.coefficients(lam)
        return kappa ** 2 * float(np.sum(np.abs(x) ** 2)) / den ** 2

    def waveform(self, lam: float, kappa: float) -> ComplexVector:
        x, den = self.coefficients(lam)
        return kappa * (self.U @ x) / den


def _direct_from_steering(problem: WaveformProblem, lambda_mode: str) -> WaveformSolution:
    _check_mode(lambda_mode)
    spectrum = _HessianSpectrum(problem)
    kind = SOLVER_KIND.AM_DIRECT
    if lambda_mode == MULTIPLIER_MODE.ZERO:
        if spectrum.singular:
            raise SingularHessianException("F0 is rank deficient, lambda = 0 update is undefined")
        return _finish(problem, spectrum.waveform(0.0, problem.kappa), 0.0, kind, lambda_mode)

    problem.check_feasible()
    if problem.r2 == 0:
        return _finish(problem, problem.center, 0.0, kind, lambda_mode)
    if spectrum.power(0.0, problem.kappa) <= problem.P_o:
        return _finish(problem, spectrum.waveform(0.0, problem.kappa), 0.0, kind, lambda_mode)

    def residual(lam):
        return spectrum.power(lam, problem.kappa) - problem.P_o

    lam = bisect_root(residual, 0.0, spectrum.scale, tol=POWER_TOL * problem.P_o,
                      xtol=MULTIPLIER_XTOL * spectrum.scale)
    return _finish(problem, spectrum.waveform(lam, problem.kappa), lam, kind, lambda_mode)


def direct_update(F0: ComplexMatrix, G: ComplexMatrix, w: ComplexVector, kappa: float, P_o: float,
                  lambda_mode: str = MULTIPLIER_MODE.ROOT) -> WaveformSolution:
    """
    Direct waveform update s = kappa F^-1 G^H w / (w^H G F^-1 G^H w), F = F0 + λI.

    In root mode λ is the smallest nonnegative value whose waveform meets ||s||^2 <= P_o.
    In zero mode λ = 0 and F0 must be invertible; the power bound is then not enforced.

    :param F0: Waveform Hessian F0(w).
    :param G: Target map.
    :param w: Receive filter.
    :param kappa: Capon gain.
    :param P_o: Power budget.
    :param lambda_mode: MULTIPLIER_MODE.ROOT or MULTIPLIER_MODE.ZERO.
    :return: The waveform solution, multiplier = λ.
    """
    y_w = G.conj().T @ w
    return _direct_from_steering(WaveformProblem(F0, y_w, kappa, P_o), lambda_mode)


def _q_of_gamma(problem: WaveformProblem, gamma: float) -> ComplexVector:
    """
    q(γ) = -(kappa/||y_w||^2) A(γ) y_w, A(γ) = (P⊥ F0 P⊥ + γ P⊥)^† P⊥ F0.
    """
    a_gamma = pseudo_inverse(problem.B0 + gamma * problem.P_perp) @ problem.P_perp @ problem.F0
    return -problem.c * (a_gamma @ problem.y_w)


def _secular(problem: WaveformProblem, gamma: float) -> float:
    q = _q_of_gamma(problem, gamma)
    pq = problem.P_perp @ q
    return float(np.real(np.vdot(pq, pq))) - problem.r2


def secular_residual(F0: ComplexMatrix, y_w: ComplexVector, kappa: float, gamma: float, P_o: float) -> float:
    """
    φ(γ) = ||P⊥ q(γ)||^2 - r^2, r^2 = P_o - kappa^2/||y_w||^2. Nonincreasing in γ >= 0.
    """
    return _secular(WaveformProblem(F0, y_w, kappa, P_o), gamma)


def _spectral_scale(problem: WaveformProblem) -> float:
    top = float(np.linalg.norm(problem.F0, 2))
    return top if top > 0 else 1.0


def _qcqp(problem: WaveformProblem, gamma_mode: str) -> WaveformSolution:
    _check_mode(gamma_mode)
    kind = SOLVER_KIND.QCQP
    if gamma_mode == MULTIPLIER_MODE.ZERO:
        return _finish(problem, problem.assemble(_q_of_gamma(problem, 0.0)), 0.0, kind, gamma_mode)
    problem.check_feasible()
    if problem.r2 == 0:
        return _finish(problem, problem.center, 0.0, kind, gamma_mode)
    gamma = 0.0
    if _secular(problem, 0.0) > 0:
        scale = _spectral_scale(problem)
        gamma = bisect_root(lambda g: _secular(problem, g), 0.0, scale,
                            tol=POWER_TOL * problem.P_o, xtol=MULTIPLIER_XTOL * scale)
    return _finish(problem, problem.assemble(_q_of_gamma(problem, gamma)), gamma, kind, gamma_mode)


def qcqp_solve(F0: ComplexMatrix, y_w: ComplexVector, kappa: float, P_o: float,
               gamma_mode: str = MULTIPLIER_MODE.ROOT) -> WaveformSolution:
    """
    Solve the waveform step through the projected problem

        min_q  q^H P⊥ F0 P⊥ q + 2 (kappa/||y_w||^2) Re{q^H P⊥ F0 y_w}
        s.t.   ||P⊥ q||^2 <= P_o - kappa^2/||y_w||^2

    and assemble s = P⊥ q(γ*) + kappa y_w/||y_w||^2.

    :return: The waveform solution, multiplier = γ.
    """
    return _qcqp(WaveformProblem(F0, y_w, kappa, P_o), gamma_mode)


def reduced_objective(problem: WaveformProblem, q: ComplexVector) -> float:
    """
    Objective of the projected problem (constant term dropped).
    """
    return float(np.real(np.vdot(q, problem.B0 @ q) + 2.0 * problem.c * np.vdot(q, problem.b)))


def dropped_constant(problem: WaveformProblem) -> float:
    """
    Constant (kappa^2/||y_w||^4) y_w^H F0 y_w separating s^H F0 s from the projected objective.
    """
    return float(problem.c ** 2 * np.real(np.vdot(problem.y_w, problem.F0 @ problem.y_w)))


def _dual_terms(problem: WaveformProblem, alpha: float) -> Tuple[float, float]:
    """
    (β, g(α)) with β = -(kappa^2/||y_w||^4) b^H B(α)^† b and g(α) = β - α r^2.
    g is -inf when b leaves the range of B(α).
    """
    b_alpha = problem.B0 + alpha * problem.P_perp
    pinv = pseudo_inverse(b_alpha)
    x = pinv @ problem.b
    norm_b = np.linalg.norm(problem.b)
    if np.linalg.norm(b_alpha @ x - problem.b) > 1e-8 * max(norm_b, TAU_ZERO) and norm_b > TAU_ZERO:
        return -np.inf, -np.inf
    beta = -problem.c ** 2 * float(np.real(np.vdot(problem.b, x)))
    return beta, beta - alpha * problem.r2


def dual_function(problem: WaveformProblem, alpha: float) -> float:
    """
    Concave dual function of the projected problem,

        g(α) = α kappa^2/||y_w||^2 - α P_o - (kappa^2/||y_w||^4) b^H B(α)^† b,

    with B(α) = P⊥ (F0 + α P⊥) P⊥ and b = P⊥ F0 y_w. Its derivative is φ(α).
    """
    return _dual_terms(problem, alpha)[1]


def _maximize_dual(problem: WaveformProblem) -> float:
    if _secular(problem, 0.0) <= 0:
        return 0.0
    hi = _spectral_scale(problem)
    for _ in range(60):
        if _secular(problem, hi) <= 0:
            break
        hi *= 2.0

    def negative_dual(alpha):
        value = dual_function(problem, alpha)
        if not np.isfinite(value):
            raise NumericalFailureException("Dual function is not finite at alpha = {}".format(alpha))
        return -value

    result = scipy.optimize.minimize_scalar(negative_dual, bounds=(0.0, hi), method="bounded",
                                            options={"xatol": DUAL_SEARCH_XTOL * hi})
    alpha = float(result.x)
    width = 4.0 * DUAL_SEARCH_XTOL * hi
    lo, up = max(0.0, alpha - width), min(hi, alpha + width)
    if _secular(problem, lo) <= 0:
        lo = 0.0
    if _secular(problem, up) > 0:
        up = hi
    # The derivative of g is φ, so the maximizer is the sign change of φ.
    return bisect_root(lambda a: _secular(problem, a), lo, up, tol=POWER_TOL * problem.P_o,
                       xtol=MULTIPLIER_XTOL * _spectral_scale(problem))


def _sdp(problem: WaveformProblem, alpha_mode: str) -> WaveformSolution:
    _check_mode(alpha_mode)
    kind = SOLVER_KIND.SDP
    if alpha_mode == MULTIPLIER_MODE.ZERO:
        alpha = 0.0
    else:
        problem.check_feasible()
        if problem.r2 == 0:
            solution = _finish(problem, problem.center, 0.0, kind, alpha_mode)
            solution.certificate = sdp_certificate(solution)
            return solution
        alpha = _maximize_dual(problem)
    solution = _finish(problem, problem.assemble(_q_of_gamma(problem, alpha)), alpha, kind, alpha_mode)
    solution.certificate = sdp_certificate(solution)
    if alpha_mode == MULTIPLIER_MODE.ROOT and not np.isfinite(solution.certificate.dual_value):
        raise NumericalFailureException("Dual value is not finite at alpha = {}".format(alpha))
    return solution


def sdp_dual_solve(F0: ComplexMatrix, y_w: ComplexVector, kappa: float, P_o: float,
                   alpha_mode: str = MULTIPLIER_MODE.ROOT) -> WaveformSolution:
    """
    Solve the waveform step through the SDP dual: maximize the concave g(α) over
    α >= 0, recover q = -(kappa/||y_w||^2) A(α) y_w and certify the result.

    :return: The waveform solution, multiplier = α, with a DualCertificate.
    """
    return _sdp(WaveformProblem(F0, y_w, kappa, P_o), alpha_mode)


def sdp_certificate(solution: WaveformSolution) -> DualCertificate:
    """
    Lift q = P⊥ s to Q = [q q^H, q; q^H, 1], evaluate the primal SDP relaxation and
    compare it with the dual value at the solution's multiplier.
    """
    problem = solution.problem
    q = problem.P_perp @ solution.s
    n = problem.N
    lifted = np.empty((n + 1, n + 1), dtype=complex)
    lifted[:n, :n] = np.outer(q, q.conj())
    lifted[:n, n] = q
    lifted[n, :n] = q.conj()
    lifted[n, n] = 1.0
    cost = np.zeros_like(lifted)
    cost[:n, :n] = problem.B0
    cost[:n, n] = problem.c * problem.b
    cost[n, :n] = problem.c * problem.b.conj()
    constraint = np.zeros_like(lifted)
    constraint[:n, :n] = problem.P_perp

    eigvals = scipy.linalg.eigvalsh(hermitian_part(lifted))
    top = float(eigvals[-1])
    psd = bool(eigvals[0] >= -TAU_PSD * top)
    clamped = np.where(np.abs(eigvals) < TAU_PSD * top, 0.0, eigvals)
    rank1_residual = float(clamped[-2] / clamped[-1]) if n > 0 else 0.0

    primal_value = float(np.real(np.trace(lifted @ cost)))
    constraint_value = float(np.real(np.trace(lifted @ constraint)))
    beta, dual_value = _dual_terms(problem, solution.multiplier)
    return DualCertificate(alpha=solution.multiplier, beta=beta, dual_value=dual_value, primal_value=primal_value,
                           gap=primal_value - dual_value, rank1_residual=rank1_residual,
                           constraint_value=constraint_value, psd=psd)


def cls_system(problem: WaveformProblem) -> Tuple[ComplexMatrix, ComplexVector]:
    """
    C = sqrt(F0) P⊥ and d = -(kappa/||y_w||^2) sqrt(F0) y_w, so that ||C q - d||^2 = s^H F0 s
    for s = P⊥ q + kappa y_w/||y_w||^2.
    """
    root = hermitian_sqrt(problem.F0)
    return root @ problem.P_perp, -problem.c * (root @ problem.y_w)


def _cls(problem: WaveformProblem, mode: str) -> WaveformSolution:
    _check_mode(mode)
    kind = SOLVER_KIND.CLS
    if mode == MULTIPLIER_MODE.ROOT:
        problem.check_feasible()
    root = hermitian_sqrt(problem.F0)
    basis = scipy.linalg.null_space(problem.y_w.conj()[np.newaxis, :])
    if basis.shape[1] == 0 or (mode == MULTIPLIER_MODE.ROOT and problem.r2 == 0):
        return _finish(problem, problem.center, 0.0, kind, mode)
    d = -problem.c * (root @ problem.y_w)
    u, sv, wh = scipy.linalg.svd(root @ basis, full_matrices=False)
    keep = sv > TAU_RANK * sv[0] if sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    sv = np.where(keep, sv, 0.0)
    dt = np.where(keep, u.conj().T @ d, 0.0)
    dt2 = np.abs(dt) ** 2

    def coefficients(mu):
        safe = np.where(keep, sv ** 2 + mu, 1.0)
        return np.where(keep, sv * dt / safe, 0.0)

    def residual(mu):
        safe = np.where(keep, sv ** 2 + mu, 1.0)
        return float(np.sum(np.where(keep, sv ** 2 * dt2 / safe ** 2, 0.0))) - problem.r2

    mu = 0.0
    if mode == MULTIPLIER_MODE.ROOT and residual(0.0) > 0:
        scale = float(sv[0] ** 2) if sv[0] > 0 else 1.0
        mu = bisect_root(residual, 0.0, scale, tol=POWER_TOL * problem.P_o, xtol=MULTIPLIER_XTOL * scale)
    q = basis @ (wh.conj().T @ coefficients(mu))
    return _finish(problem, q + problem.center, mu, kind, mode)


def cls_solve(F0: ComplexMatrix, y_w: ComplexVector, kappa: float, P_o: float,
              mode: str = MULTIPLIER_MODE.ROOT) -> WaveformSolution:
    """
    Solve min ||C q - d||^2 s.t. ||P⊥ q||^2 <= r^2 with the SVD of C restricted to
    range(P⊥): the minimum norm solution when it is feasible, otherwise the root of
    the SVD diagonalized secular equation.

    :return: The waveform solution, multiplier = μ (equal to γ at the optimum).
    """
    return _cls(WaveformProblem(F0, y_w, kappa, P_o), mode)


def scale_solution(w: ComplexVector, s: ComplexVector, P_o: float) -> Tuple[ComplexVector, ComplexVector]:
    """
    Rescale (w, s) to (||s||/sqrt(P_o) w, sqrt(P_o)/||s|| s). The Capon product and the
    clutter response are unchanged, ||s'||^2 = P_o, and the noise plus interference
    response scales by ||s||^2/P_o.
    """
    norm = float(np.linalg.norm(s))
    if norm <= TAU_ZERO:
        raise ZeroWaveformException("Cannot rescale a zero waveform")
    factor = np.sqrt(P_o) / norm
    if factor == 1.0:
        return w, s
    return w / factor, s * factor


class WaveformSolver(object):
    """
    Abstract class for waveform step solvers.
    """

    KIND = None

    def __init__(self, mode: str = MULTIPLIER_MODE.ROOT):
        """
        :param mode: Multiplier mode. Supported values are in MULTIPLIER_MODE.ALL.
        """
        _check_mode(mode)
        self.mode = mode

    def solve(self, F0: ComplexMatrix, y_w: ComplexVector, kappa: float, P_o: float) -> WaveformSolution:
        return self._solve(WaveformProblem(F0, y_w, kappa, P_o))

    def _solve(self, problem: WaveformProblem) -> WaveformSolution:
        raise(NotImplementedError("{} is an abstract class and cannot be directly used.".format(self.__class__)))


class DirectSolver(WaveformSolver):
    KIND = SOLVER_KIND.AM_DIRECT

    def _solve(self, problem):
        return _direct_from_steering(problem, self.mode)


class QcqpSolver(WaveformSolver):
    KIND = SOLVER_KIND.QCQP

    def _solve(self, problem):
        return _qcqp(problem, self.mode)


class SdpDualSolver(WaveformSolver):
    KIND = SOLVER_KIND.SDP

    def _solve(self, problem):
        return _sdp(problem, self.mode)


class ClsSolver(WaveformSolver):
    KIND = SOLVER_KIND.CLS

    def _solve(self, problem):
        return _cls(problem, self.mode)


_SOLVERS = {cls.KIND: cls for cls in (DirectSolver, QcqpSolver, SdpDualSolver, ClsSolver)}


def get_solver(kind: str, mode: str = MULTIPLIER_MODE.ROOT) -> WaveformSolver:
    """
    :param kind: One of SOLVER_KIND.ALL.
    :param mode: One of MULTIPLIER_MODE.ALL.
    :return: A solver instance.
    """
    if kind not in _SOLVERS:
        raise UnsupportedSolverException("Solver '{}' is not supported".format(kind))
    return _SOLVERS[kind](mode)
