"""Structured matrix completion: recover the missing block ``A22`` of

    A = [[A11, A12],
         [A21, A22]]

from the observed ``A11`` (m1 x m2), ``A12`` (m1 x (p2-m2)) and ``A21``
((p1-m1) x m2).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import matlin
from .matlin import DEFAULT_RCOND, SingularMatrixError

# right_divide residuals above this fraction of ||Y||_F mark the step singular
RESIDUAL_TOL = 1e-6


class BlockShapeError(ValueError):
    """Block dimensions are inconsistent; ``block`` names the offender."""

    def __init__(self, block: str, message: str):
        super().__init__(f"{block}: {message}")
        self.block = block


class Mode(enum.Enum):
    ROW = "row"
    COL = "col"


@dataclass(frozen=True)
class BlockPartition:
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("a11", "a12", "a21", "a22"):
            value = getattr(self, name)
            if value is None:
                continue
            try:
                arr = matlin.as_matrix(value, name)
            except ValueError as exc:
                raise BlockShapeError(name, str(exc)) from None
            object.__setattr__(self, name, arr)
        m1, m2 = self.a11.shape
        if self.a12.shape[0] != m1:
            raise BlockShapeError(
                "a12", f"has {self.a12.shape[0]} rows, a11 has {m1}"
            )
        if self.a21.shape[1] != m2:
            raise BlockShapeError(
                "a21", f"has {self.a21.shape[1]} columns, a11 has {m2}"
            )
        if self.a22 is not None and self.a22.shape != (
            self.a21.shape[0],
            self.a12.shape[1],
        ):
            raise BlockShapeError(
                "a22",
                f"has shape {self.a22.shape}, expected "
                f"{(self.a21.shape[0], self.a12.shape[1])}",
            )

    @classmethod
    def from_matrix(cls, A, m1: int, m2: int, with_truth: bool = True):
        """Split ``A`` with the first ``m1`` rows and ``m2`` columns observed."""
        A = matlin.as_matrix(A, "A")
        p1, p2 = A.shape
        if not (0 < m1 < p1 and 0 < m2 < p2):
            raise ValueError(f"need 0 < m1 < p1 and 0 < m2 < p2, got {(m1, m2, p1, p2)}")
        return cls(
            A[:m1, :m2], A[:m1, m2:], A[m1:, :m2], A[m1:, m2:] if with_truth else None
        )

    @property
    def m1(self) -> int:
        return self.a11.shape[0]

    @property
    def m2(self) -> int:
        return self.a11.shape[1]

    @property
    def p1(self) -> int:
        return self.m1 + self.a21.shape[0]

    @property
    def p2(self) -> int:
        return self.m2 + self.a12.shape[1]

    @property
    def col_block(self) -> np.ndarray:
        """``A_{.1} = [A11; A21]``, the fully observed columns."""
        return np.vstack([self.a11, self.a21])

    @property
    def row_block(self) -> np.ndarray:
        """``A_{1.} = [A11, A12]``, the fully observed rows."""
        return np.hstack([self.a11, self.a12])

    def observed_only(self) -> "BlockPartition":
        return BlockPartition(self.a11, self.a12, self.a21)

    def assemble(self, a22=None) -> np.ndarray:
        a22 = self.a22 if a22 is None else a22
        if a22 is None:
            a22 = np.zeros((self.p1 - self.m1, self.p2 - self.m2))
        return np.block([[self.a11, self.a12], [self.a21, a22]])


def default_threshold(p: int, m: int) -> float:
    """Default break threshold ``2 sqrt(p/m)``."""
    if not (0 < m < p):
        raise ValueError(f"need 0 < m < p, got m={m}, p={p}")
    return 2.0 * math.sqrt(p / m)


@dataclass(frozen=True)
class ThresholdPolicy:
    mode: Mode
    threshold: float
    rcond: float = DEFAULT_RCOND

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if not 0 < self.rcond < 1:
            raise ValueError(f"rcond must lie in (0, 1), got {self.rcond}")

    @classmethod
    def default(cls, blocks: BlockPartition, mode=Mode.ROW, const: float = 2.0,
                rcond: float = DEFAULT_RCOND) -> "ThresholdPolicy":
        """Threshold ``const * sqrt(p1/m1)`` for rows, ``const * sqrt(p2/m2)`` for columns."""
        mode = Mode(mode)
        if mode is Mode.ROW:
            t = const / 2.0 * default_threshold(blocks.p1, blocks.m1)
        else:
            t = const / 2.0 * default_threshold(blocks.p2, blocks.m2)
        return cls(mode, t, rcond)


@dataclass
class SmcResult:
    """``d_norm_trace`` holds ``(s, ||D_s||)`` per visited ``s``; ``None`` marks a singular block."""

    a22_hat: np.ndarray
    r_hat: int
    d_norm_trace: List[Tuple[int, Optional[float]]] = field(default_factory=list)


def schur_complete(blocks: BlockPartition, rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """``A21 A11^+ A12``, exact when rank(A) = rank(A11)."""
    if not np.any(blocks.a11):
        raise ValueError("a11 is identically zero")
    return blocks.a21 @ (matlin.pinv(blocks.a11, rcond) @ blocks.a12)


def _leading_left(M: np.ndarray, k: int) -> np.ndarray:
    # full_matrices only when the thin factor would have fewer than k columns
    return matlin.svd(M, full_matrices=min(M.shape) < k).U[:, :k]


def _leading_right(M: np.ndarray, k: int) -> np.ndarray:
    return matlin.svd(M, full_matrices=min(M.shape) < k).V[:, :k]


def recover_known_rank(blocks: BlockPartition, r: int,
                       rcond: float = DEFAULT_RCOND) -> np.ndarray:
    """Rank-``r`` estimator ``A21 N (M^T A11 N)^{-1} M^T A12``.

    ``M`` holds the leading ``r`` left singular vectors of ``[A11, A12]`` and
    ``N`` the leading ``r`` right singular vectors of ``[A11; A21]``.
    """
    if not 1 <= r <= min(blocks.m1, blocks.m2):
        raise ValueError(f"r must lie in [1, min(m1, m2)] = [1, {min(blocks.m1, blocks.m2)}], got {r}")
    M = _leading_left(blocks.row_block, r)
    N = _leading_right(blocks.col_block, r)
    middle = M.T @ blocks.a11 @ N
    try:
        left = matlin.right_divide(blocks.a21 @ N, middle, rcond)
    except SingularMatrixError:
        raise SingularMatrixError(
            f"M^T A11 N is numerically singular for r={r}; the rank is probably "
            "larger than the numerical rank of the observed blocks"
        ) from None
    return left @ (M.T @ blocks.a12)


def transform_blocks(blocks: BlockPartition):
    """Rotate the observed blocks onto the singular bases of ``A_{.1}`` and ``A_{1.}``.

    Returns ``(z11, z12, z21)`` with ``z11 = U2^T A11 V1``, ``z12 = U2^T A12``
    and ``z21 = A21 V1``.
    """
    U2 = _leading_left(blocks.row_block, blocks.m1)
    V1 = _leading_right(blocks.col_block, blocks.m2)
    z11 = U2.T @ blocks.a11 @ V1
    z12 = U2.T @ blocks.a12
    z21 = blocks.a21 @ V1
    return z11, z12, z21


def _divide_step(z11s: np.ndarray, side: np.ndarray, mode: Mode, rcond: float):
    """``D_{R,s}`` or ``D_{C,s}``; ``None`` when the leading block is singular."""
    try:
        if mode is Mode.ROW:
            D = matlin.right_divide(side, z11s, rcond)
            resid = np.linalg.norm(D @ z11s - side)
        else:
            D = matlin.left_divide(z11s, side, rcond)
            resid = np.linalg.norm(z11s @ D - side)
    except SingularMatrixError:
        return None
    scale = np.linalg.norm(side)
    if scale > 0 and resid > RESIDUAL_TOL * scale:
        return None
    return D


def _scan(z11, side, policy: ThresholdPolicy):
    """Walk ``s`` from ``min(m1, m2)`` down; return ``(r_hat, D, trace)``."""
    trace: List[Tuple[int, Optional[float]]] = []
    for s in range(min(z11.shape), 0, -1):
        if policy.mode is Mode.ROW:
            part = side[:, :s]
        else:
            part = side[:s, :]
        D = _divide_step(z11[:s, :s], part, policy.mode, policy.rcond)
        if D is None:
            trace.append((s, None))
            continue
        norm = matlin.spectral_norm(D)
        trace.append((s, norm))
        if norm <= policy.threshold:
            return s, D, trace
    return 0, None, trace


def estimate_rank(z11, side, policy: ThresholdPolicy):
    """Thresholded rank search.

    ``side`` is ``z21`` in row mode and ``z12`` in column mode. Returns
    ``(r_hat, trace)``; ``r_hat = 0`` when no ``s`` passes.
    """
    r_hat, _, trace = _scan(np.asarray(z11), np.asarray(side), policy)
    return r_hat, trace


def recover_unknown_rank(blocks: BlockPartition,
                         policy: Optional[ThresholdPolicy] = None) -> SmcResult:
    """Estimate the rank by thresholding, then form ``Z21 Z11^{-1} Z12`` at that rank.

    With no policy, row thresholding at ``2 sqrt(p1/m1)`` is used.
    """
    if policy is None:
        policy = ThresholdPolicy.default(blocks)
    z11, z12, z21 = transform_blocks(blocks)
    side = z21 if policy.mode is Mode.ROW else z12
    r_hat, D, trace = _scan(z11, side, policy)
    shape = (blocks.p1 - blocks.m1, blocks.p2 - blocks.m2)
    if r_hat == 0:
        return SmcResult(np.zeros(shape), 0, trace)
    if policy.mode is Mode.ROW:
        a22_hat = D @ z12[:r_hat, :]
    else:
        a22_hat = z21[:, :r_hat] @ D
    return SmcResult(a22_hat, r_hat, trace)
