"""Dense matrix core: SVD, Schatten norms, linear solves and rank utilities.

Matrices are plain 2-d ``numpy.ndarray`` objects in float64. Everything here
is a pure function of its inputs.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple, Union

import numpy as np
import scipy.linalg

DEFAULT_RCOND = 1e-12


class SvdConvergenceError(np.linalg.LinAlgError):
    """Raised when no LAPACK driver manages to converge."""


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class SchattenQ(enum.Enum):
    """Distinguished exponent values for :func:`schatten_norm`."""

    INF = "inf"


INF = SchattenQ.INF
QValue = Union[float, int, SchattenQ]


class SvdFactorization(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate ``M`` as a finite, nonempty 2-d float64 array."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty (shape {arr.shape})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def svd(M, full_matrices: bool = False) -> SvdFactorization:
    """Thin SVD ``M = U diag(sigma) V^T`` with ``sigma`` nonincreasing.

    Tries the divide-and-conquer driver first and falls back to the slower
    but more robust QR-iteration driver.
    """
    M = as_matrix(M)
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=full_matrices)
    except np.linalg.LinAlgError:
        try:
            U, s, Vt = scipy.linalg.svd(
                M, full_matrices=full_matrices, lapack_driver="gesvd"
            )
        except np.linalg.LinAlgError as exc:
            raise SvdConvergenceError(
                f"SVD did not converge for a {M.shape[0]}x{M.shape[1]} matrix"
            ) from exc
    return SvdFactorization(U, s, Vt.T)


def singular_values(M) -> np.ndarray:
    M = as_matrix(M)
    try:
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError:
        try:
            return scipy.linalg.svdvals(M)
        except np.linalg.LinAlgError as exc:
            raise SvdConvergenceError("singular value computation did not converge") from exc


def _normalize_q(q: QValue) -> QValue:
    if q is INF or (isinstance(q, (int, float)) and math.isinf(q) and q > 0):
        return INF
    if isinstance(q, SchattenQ):
        return q
    q = float(q)
    if math.isnan(q) or q < 1:
        raise ValueError(f"Schatten exponent must satisfy q >= 1, got {q}")
    return q


def schatten_from_sigma(sigma: np.ndarray, q: QValue) -> float:
    q = _normalize_q(q)
    sigma = np.abs(np.asarray(sigma, dtype=np.float64))
    if sigma.size == 0:
        return 0.0
    if q is INF:
        return float(sigma.max())
    if q == 1:
        return float(sigma.sum())
    # scale first so large q does not overflow
    top = sigma.max()
    if top == 0:
        return 0.0
    return float(top * np.sum((sigma / top) ** q) ** (1.0 / q))


def schatten_norm(M, q: QValue) -> float:
    """Schatten-q norm; ``q=1`` nuclear, ``q=2`` Frobenius, ``q=INF`` spectral."""
    q = _normalize_q(q)
    return schatten_from_sigma(singular_values(M), q)


def spectral_norm(M) -> float:
    """Largest singular value.

    For clearly rectangular inputs this is the top eigenvalue of the small
    Gram matrix, which keeps full relative accuracy for the largest value.
    """
    M = as_matrix(M)
    k, n = min(M.shape), max(M.shape)
    if k < 2 or n < 2 * k:
        return schatten_norm(M, INF)
    G = M.T @ M if M.shape[0] >= M.shape[1] else M @ M.T
    top = scipy.linalg.eigvalsh(G, subset_by_index=[k - 1, k - 1], check_finite=False)
    return math.sqrt(max(float(top[0]), 0.0))


def is_numerically_singular(B, rcond: float = DEFAULT_RCOND) -> bool:
    """True iff ``sigma_min(B) <= rcond * sigma_max(B)`` or ``B`` is zero."""
    B = as_matrix(B)
    if B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    s = singular_values(B)
    if s[0] == 0:
        return True
    return bool(s[-1] <= rcond * s[0])


def right_divide(Y, B, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Solve ``X B = Y`` for ``X`` without forming ``B^{-1}``."""
    Y = as_matrix(Y, "Y")
    B = as_matrix(B, "B")
    if B.shape[0] != B.shape[1]:
        raise ValueError(f"B must be square, got shape {B.shape}")
    if Y.shape[1] != B.shape[0]:
        raise ValueError(
            f"Y has {Y.shape[1]} columns but B is {B.shape[0]}x{B.shape[1]}"
        )
    if is_numerically_singular(B, rcond):
        raise SingularMatrixError(
            f"{B.shape[0]}x{B.shape[0]} matrix is numerically singular (rcond={rcond:g})"
        )
    # X B = Y  <=>  B^T X^T = Y^T
    return scipy.linalg.solve(B.T, Y.T, check_finite=False).T


def left_divide(B, Y, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Solve ``B X = Y`` for ``X``."""
    return right_divide(np.asarray(Y).T, np.asarray(B).T, rcond).T


def min_singular(M) -> float:
    return float(singular_values(M)[-1])


def pinv(M, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with relative cutoff ``rcond``."""
    U, s, V = svd(M)
    if s.size == 0 or s[0] == 0:
        return np.zeros((M.shape[1], M.shape[0]))
    keep = s > rcond * s[0]
    return (V[:, keep] / s[keep]) @ U[:, keep].T
