"""Input validation helpers shared by the estimator and functional APIs."""
import numpy as np

from .exceptions import DimensionError, DomainError


def check_matrix(M, name="matrix", square=False, dtype=float):
    """Return ``M`` as a finite 2-D float array, raising ``DimensionError`` otherwise."""
    arr = np.asarray(M, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_vector(v, n, name="vector"):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise DimensionError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value}")
    return value


def check_nonnegative_int(value, name):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise DomainError(f"{name} must be a nonnegative integer, got {value!r}")
    return int(value)


def symmetrize(S):
    """Return the symmetric part ``(S + S^T) / 2``."""
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)
