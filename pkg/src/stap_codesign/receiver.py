# coding=utf-8
"""
Receive filter (MVDR / Capon) half-step of the alternating minimization.
"""

import logging
import warnings

import numpy as np
import scipy.linalg

from .exceptions import SingularCovarianceException, ZeroSteeringException
from .matrix_ops import ComplexMatrix, ComplexVector, TAU_ZERO

_logger = logging.getLogger(__name__)


def _solve_covariance(R_u: ComplexMatrix, g: ComplexVector) -> ComplexVector:
    """
    Solve R_u x = g with a Cholesky factorization, falling back to pivoted LU.
    """
    try:
        factor = scipy.linalg.cho_factor(R_u, lower=True, check_finite=True)
        return scipy.linalg.cho_solve(factor, g)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        _logger.warning("Cholesky factorization failed, falling back to LU")
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            lu_piv = scipy.linalg.lu_factor(R_u, check_finite=True)
            x = scipy.linalg.lu_solve(lu_piv, g)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as e:
            raise SingularCovarianceException("Covariance solve failed: {}".format(e))
    if not np.all(np.isfinite(x)):
        raise SingularCovarianceException("Covariance solve produced non finite values")
    return x


def mvdr_update(R_u: ComplexMatrix, G: ComplexMatrix, s: ComplexVector, kappa: float) -> ComplexVector:
    """
    Capon weight vector for waveform s:

        w = kappa R_u^{-1} G s / (s^H G^H R_u^{-1} G s)

    It minimizes w^H R_u w subject to w^H G s = kappa.

    :param R_u: Interference plus noise covariance (Hermitian positive definite).
    :param G: Target map, so that G s = v ⊗ s ⊗ a.
    :param s: Waveform.
    :param kappa: Capon gain (real).
    :return: The weight vector.
    """
    g = G @ s
    if np.linalg.norm(g) <= TAU_ZERO:
        raise ZeroSteeringException("Target steering vector G s is zero")
    x = _solve_covariance(R_u, g)
    den = float(np.real(np.vdot(g, x)))
    if not den > 0:
        raise SingularCovarianceException("Non positive quadratic form g^H R_u^-1 g = {}".format(den))
    return kappa * x / den
