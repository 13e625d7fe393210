# coding=utf-8
"""
Complex matrix primitives shared by every solver: Kronecker products, Hermitian
square roots, pseudoinverses, rank-1 projectors and monotone root bracketing.

Matrices and vectors are plain complex numpy arrays.
"""

import logging
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import NotHermitianException, NotPSDException, ZeroVectorException, \
    NoSignChangeException, NumericalFailureException

_logger = logging.getLogger(__name__)

# Tolerances
TAU_HERM = 1e-10
TAU_PSD = 1e-10
TAU_RANK = 1e-12
TAU_ZERO = 1e-14
TAU_MP = 1e-9

MAX_DOUBLINGS = 60
_MAX_BISECTIONS = 500

ComplexMatrix = np.ndarray
ComplexVector = np.ndarray


def as_complex(m, name: str = "matrix") -> np.ndarray:
    """
    Convert to a complex array and check that every entry is finite.
    :param m: Array like.
    :param name: Name used in the error message.
    :return: Complex numpy array.
    """
    res = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(res)):
        raise NumericalFailureException("{} has non finite entries".format(name))
    return res


def kron(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """
    Kronecker product a ⊗ b. Vectors stay vectors.
    """
    return np.kron(as_complex(a, "a"), as_complex(b, "b"))


def hermitian_part(f: ComplexMatrix) -> ComplexMatrix:
    return 0.5 * (f + f.conj().T)


def check_hermitian(f: ComplexMatrix, tol: float = TAU_HERM) -> None:
    """
    Raise NotHermitianException if the relative max-abs asymmetry of f exceeds tol.
    """
    scale = max(1.0, float(np.max(np.abs(f)))) if f.size else 1.0
    asym = float(np.max(np.abs(f - f.conj().T))) if f.size else 0.0
    if asym > tol * scale:
        raise NotHermitianException("Asymmetry {:.3e} exceeds tolerance {:.1e}".format(asym, tol * scale))


def psd_eigh(f: ComplexMatrix):
    """
    Eigendecomposition of a Hermitian PSD matrix with small eigenvalues clamped to zero.

    :param f: Hermitian PSD matrix.
    :return: (eigenvalues ascending and clamped, eigenvectors as columns).
    """
    f = as_complex(f, "f")
    check_hermitian(f)
    eigvals, eigvecs = scipy.linalg.eigh(hermitian_part(f))
    spectral = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    floor = TAU_PSD * spectral
    if eigvals.size and eigvals[0] < -floor:
        raise NotPSDException("Eigenvalue {:.3e} below -{:.1e}".format(eigvals[0], floor))
    eigvals = np.where(eigvals < floor, 0.0, eigvals)
    return eigvals, eigvecs


def hermitian_sqrt(f: ComplexMatrix) -> ComplexMatrix:
    """
    Square root factor S with S^H S = f, computed from the eigendecomposition of f.
    Singular PSD inputs are allowed.

    :param f: Hermitian positive semidefinite matrix.
    :return: S = diag(sqrt(e)) V^H, where f = V diag(e) V^H.
    """
    eigvals, eigvecs = psd_eigh(f)
    return np.sqrt(eigvals)[:, np.newaxis] * eigvecs.conj().T


def pseudo_inverse(m: ComplexMatrix) -> ComplexMatrix:
    """
    Moore-Penrose pseudoinverse. Singular values below TAU_RANK times the largest
    one are treated as zero.
    """
    m = as_complex(m, "m")
    if m.size == 0:
        return np.zeros(m.shape[::-1], dtype=complex)
    u, sv, vh = scipy.linalg.svd(m, full_matrices=False)
    cutoff = TAU_RANK * sv[0] if sv.size else 0.0
    keep = sv > cutoff
    inv_sv = np.zeros_like(sv)
    inv_sv[keep] = 1.0 / sv[keep]
    return (vh.conj().T * inv_sv) @ u.conj().T


def vector_projector(y: ComplexVector) -> ComplexMatrix:
    """
    Rank-1 orthogonal projector y y^H / ||y||^2.
    """
    y = as_complex(y, "y").ravel()
    norm2 = float(np.real(np.vdot(y, y)))
    if np.sqrt(norm2) <= TAU_ZERO:
        raise ZeroVectorException("Cannot build the projector of a zero vector")
    return np.outer(y, y.conj()) / norm2


def complement_projector(y: ComplexVector) -> ComplexMatrix:
    """
    Projector onto the orthogonal complement of y, I - y y^H / ||y||^2.
    """
    p = vector_projector(y)
    return np.eye(p.shape[0], dtype=complex) - p


def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float, xtol: float = None) -> float:
    """
    Root of a monotone scalar function by bisection.

    If f(lo) and f(hi) have the same sign, hi is doubled (up to MAX_DOUBLINGS times)
    until the sign changes. When the bracket collapses below xtol the endpoint on
    the f(hi) side is returned, so callers get a point on the known side of the root.

    :param f: Monotone function on [lo, hi].
    :param lo: Lower end of the bracket.
    :param hi: Upper end of the bracket.
    :param tol: Accept x once |f(x)| <= tol.
    :param xtol: Absolute bracket width at which bisection stops. Defaults to tol.
    :return: The approximate root.
    """
    if xtol is None:
        xtol = tol
    f_lo = f(lo)
    if abs(f_lo) <= tol:
        return lo
    f_hi = f(hi)
    doublings = 0
    while np.sign(f_hi) == np.sign(f_lo) and abs(f_hi) > tol:
        if doublings >= MAX_DOUBLINGS:
            raise NoSignChangeException("No sign change on [{}, {}] after {} doublings".format(lo, hi, doublings))
        hi = 2.0 * hi if hi > 0 else 1.0
        f_hi = f(hi)
        doublings += 1
    if abs(f_hi) <= tol:
        return hi
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        raise NumericalFailureException("Non finite function value while bracketing")

    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if abs(f_mid) <= tol:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= xtol:
            break
    _logger.debug("Bisection stopped on bracket [%r, %r]", lo, hi)
    return hi
