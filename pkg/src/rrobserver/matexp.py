"""Dense matrix exponential primitives.

``mat_exp`` delegates to :func:`scipy.linalg.expm` (scaling and squaring
with a degree-13 Pade kernel).  ``exp_integral`` never inverts the state
matrix; it reads the integral off the upper-right block of an augmented
exponential, so singular matrices are handled exactly.
"""
import numpy as np
from scipy import linalg

from ._validation import check_matrix, symmetrize
from .exceptions import DomainError

#: Relative accuracy of ``mat_exp`` against a truncated Taylor series.
EXPM_RTOL = 1e-12
#: Residual bound for ``M @ exp_integral(M, t) == mat_exp(M, t) - I``.
INTEGRAL_ATOL = 1e-10
#: Symmetry tolerance enforced on symmetric matrices.
SYMMETRY_ATOL = 1e-12
#: Residual bound on computed eigenpairs.
EIG_RESIDUAL_ATOL = 1e-8


def mat_exp(M, t=1.0):
    """Return ``exp(M t)``."""
    M = check_matrix(M, "M", square=True)
    t = float(t)
    if not np.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    if t == 0.0:
        return np.eye(M.shape[0])
    return linalg.expm(M * t)


def exp_integral(M, t):
    """Return ``int_0^t exp(M s) ds`` via the block exponential of ``[[M, I], [0, 0]]``."""
    M = check_matrix(M, "M", square=True)
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"integration horizon must be finite and >= 0, got {t}")
    n = M.shape[0]
    if t == 0.0:
        return np.zeros((n, n))
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = M
    aug[:n, n:] = np.eye(n)
    return linalg.expm(aug * t)[:n, n:]


def exp_and_integral(M, t):
    """Return ``(exp(M t), int_0^t exp(M s) ds)`` from a single augmented exponential."""
    M = check_matrix(M, "M", square=True)
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"integration horizon must be finite and >= 0, got {t}")
    n = M.shape[0]
    if t == 0.0:
        return np.eye(n), np.zeros((n, n))
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = M
    aug[:n, n:] = np.eye(n)
    E = linalg.expm(aug * t)
    return E[:n, :n], E[:n, n:]


def eig_spectrum(M):
    """All eigenvalues of ``M`` with multiplicity, in no particular order."""
    M = check_matrix(M, "M", square=True)
    return np.linalg.eigvals(M)


def spectral_radius(M):
    return float(np.max(np.abs(eig_spectrum(M))))


def is_negative_definite(S, margin=0.0):
    """True iff the largest eigenvalue of the symmetric part of ``S`` is below ``-margin``."""
    S = check_matrix(S, "S", square=True)
    if margin < 0:
        raise DomainError("margin must be nonnegative")
    return bool(np.linalg.eigvalsh(symmetrize(S))[-1] < -margin)


def max_eig(S):
    return float(np.linalg.eigvalsh(symmetrize(S))[-1])


def min_eig(S):
    return float(np.linalg.eigvalsh(symmetrize(S))[0])
