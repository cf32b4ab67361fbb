"""Synthetic instances: Haar singular spaces, spectrum profiles, sampling
schemes, coherence statistics and the two-matrix lower-bound construction."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from . import matlin
from .smc import BlockPartition


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


# --- spectrum profiles -------------------------------------------------------

@dataclass(frozen=True)
class Gap:
    """``r`` ones followed by ``1/(g j)`` for ``j = 1, 2, ...``."""

    r: int
    g: float

    def values(self, n: int) -> np.ndarray:
        if self.r < 0 or not self.g > 0:
            raise ValueError("Gap profile needs r >= 0 and g > 0")
        head = np.ones(min(self.r, n))
        tail = 1.0 / (self.g * np.arange(1, n - head.size + 1))
        return np.concatenate([head, tail])


@dataclass(frozen=True)
class Power:
    """``j^{-alpha}`` for ``j = 1..n``."""

    alpha: float

    def values(self, n: int) -> np.ndarray:
        if not self.alpha > 0:
            raise ValueError("Power profile needs alpha > 0")
        return np.arange(1, n + 1, dtype=np.float64) ** (-self.alpha)


@dataclass(frozen=True)
class Explicit:
    sigma: Tuple[float, ...]

    def values(self, n: int) -> np.ndarray:
        s = np.asarray(self.sigma, dtype=np.float64)
        if s.size > n:
            raise ValueError(f"explicit spectrum has {s.size} values, only {n} fit")
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ValueError("explicit spectrum must be nonnegative and nonincreasing")
        return np.concatenate([s, np.zeros(n - s.size)])


SpectrumProfile = Union[Gap, Power, Explicit]


# --- sampling schemes --------------------------------------------------------

@dataclass(frozen=True)
class SamplingScheme:
    """How the observed rows/columns are chosen.

    ``kind`` is ``"first"`` (leading indices), ``"without"`` (uniform without
    replacement) or ``"with"`` (uniform with replacement; duplicate draws are
    collapsed, so the observed set may be smaller than requested).
    """

    kind: str = "first"
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("first", "without", "with"):
            raise ValueError(f"unknown sampling scheme {self.kind!r}")

    def draw(self, p: int, m: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "first":
            return np.arange(m)
        if self.kind == "without":
            return np.sort(rng.choice(p, size=m, replace=False))
        return np.unique(rng.integers(0, p, size=m))


FIRST_ROWS_COLS = SamplingScheme("first")


# --- generators --------------------------------------------------------------

def haar_orthonormal(p: int, k: int, rng=None) -> np.ndarray:
    """``p x k`` matrix with Haar-distributed orthonormal columns.

    Gaussian draw followed by QR; columns are flipped so that ``R`` has a
    positive diagonal, without which the law of ``Q`` is not Haar.
    """
    if not 0 < k <= p:
        raise ValueError(f"need 0 < k <= p, got k={k}, p={p}")
    rng = as_rng(rng)
    Q, R = np.linalg.qr(rng.standard_normal((p, k)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def make_instance(p1: int, p2: int, spectrum: SpectrumProfile, rng=None) -> np.ndarray:
    """``A = U diag(sigma) V^T`` with Haar ``U``, ``V`` and the given spectrum."""
    rng = as_rng(rng)
    n = min(p1, p2)
    sigma = spectrum.values(n)
    U = haar_orthonormal(p1, n, rng)
    V = haar_orthonormal(p2, n, rng)
    return (U * sigma) @ V.T


def make_exact_rank(p1: int, p2: int, r: int, rng=None) -> np.ndarray:
    """Rank-``r`` matrix with Haar factors and unit singular values."""
    rng = as_rng(rng)
    return haar_orthonormal(p1, r, rng) @ haar_orthonormal(p2, r, rng).T


def split_blocks(A, m1: int, m2: int, scheme: SamplingScheme = FIRST_ROWS_COLS, rng=None):
    """Partition ``A`` by observed index sets; returns ``(blocks, rows, cols)``.

    ``blocks.a22`` carries the ground truth ``A[rows^c, cols^c]``.
    """
    A = matlin.as_matrix(A, "A")
    p1, p2 = A.shape
    if not (0 < m1 < p1 and 0 < m2 < p2):
        raise ValueError(f"need 0 < m1 < p1 and 0 < m2 < p2, got {(m1, m2, p1, p2)}")
    rng = as_rng(scheme.seed if rng is None else rng)
    rows = scheme.draw(p1, m1, rng)
    cols = scheme.draw(p2, m2, rng)
    rows_c = np.setdiff1d(np.arange(p1), rows)
    cols_c = np.setdiff1d(np.arange(p2), cols)
    blocks = BlockPartition(
        A[np.ix_(rows, cols)],
        A[np.ix_(rows, cols_c)],
        A[np.ix_(rows_c, cols)],
        A[np.ix_(rows_c, cols_c)],
    )
    return blocks, rows, cols


def reassemble(blocks: BlockPartition, rows, cols) -> np.ndarray:
    """Inverse of :func:`split_blocks`."""
    p1, p2 = blocks.p1, blocks.p2
    rows_c = np.setdiff1d(np.arange(p1), rows)
    cols_c = np.setdiff1d(np.arange(p2), cols)
    A = np.empty((p1, p2))
    A[np.ix_(rows, cols)] = blocks.a11
    A[np.ix_(rows, cols_c)] = blocks.a12
    A[np.ix_(rows_c, cols)] = blocks.a21
    A[np.ix_(rows_c, cols_c)] = blocks.a22
    return A


# --- diagnostics -------------------------------------------------------------

def coherence(U, r: int) -> float:
    """``(p/r) max_i sum_{j<=r} U_ij^2`` over the leading ``r`` columns."""
    U = np.asarray(U, dtype=np.float64)
    if not 0 < r <= U.shape[1]:
        raise ValueError(f"r must lie in [1, {U.shape[1]}], got {r}")
    leverage = np.sum(U[:, :r] ** 2, axis=1)
    return float(U.shape[0] / r * leverage.max())


@dataclass(frozen=True)
class GapDiagnostics:
    holds: bool
    """``sigma_{r+1} <= 1/2 sigma_r smin(U11) smin(V11)`` (known-rank bound)."""
    holds_quarter: bool
    """The same with ``1/4`` (unknown-rank bound)."""
    sigma_min_u11: float
    sigma_min_v11: float
    ratio: float
    """``sigma_{r+1} / (sigma_r smin(U11) smin(V11))``; ``inf`` if the denominator vanishes."""
    tail_sigma: np.ndarray
    """Singular values ``sigma_{r+1}, ...``; their Schatten norms give ``||A_{-max(r)}||_q``."""

    def tail_norm(self, q) -> float:
        return matlin.schatten_from_sigma(self.tail_sigma, q)


def gap_condition(A, m1: int, m2: int, r: int) -> GapDiagnostics:
    A = matlin.as_matrix(A, "A")
    if not 1 <= r <= min(m1, m2):
        raise ValueError(f"r must lie in [1, min(m1, m2)], got {r}")
    U, s, V = matlin.svd(A)
    su = matlin.min_singular(U[:m1, :r])
    sv = matlin.min_singular(V[:m2, :r])
    next_sigma = s[r] if r < s.size else 0.0
    denom = s[r - 1] * su * sv
    ratio = next_sigma / denom if denom > 0 else math.inf
    return GapDiagnostics(
        holds=bool(ratio <= 0.5),
        holds_quarter=bool(ratio <= 0.25),
        sigma_min_u11=su,
        sigma_min_v11=sv,
        ratio=float(ratio),
        tail_sigma=s[r:].copy(),
    )


def lowerbound_pair(M1: float, M2: float, r: int, m1: int, m2: int, p1: int, p2: int,
                    epsilon: float, eta: float):
    """Two matrices with identical observed blocks whose ``A22`` differ by ``2 eps I_r``.

    Uses ``a = 1``, ``b = sqrt(1-M1^2)/M1 - eta``, ``c = sqrt(1-M2^2)/M2 - eta``,
    ``d = bc`` and ``A22 = (d +/- eps) I_r`` padded with zeros.
    """
    if not (0 < M1 < 1 and 0 < M2 < 1):
        raise ValueError("M1 and M2 must lie in (0, 1)")
    if not 1 <= r <= min(m1, m2, p1 - m1, p2 - m2):
        raise ValueError("need 1 <= r <= min(m1, m2, p1 - m1, p2 - m2)")
    if eta <= 0 or epsilon == 0:
        raise ValueError("eta must be positive and epsilon nonzero")
    a = 1.0
    b = math.sqrt(1 - M1 ** 2) / M1 - eta
    c = math.sqrt(1 - M2 ** 2) / M2 - eta
    if b <= 0 or c <= 0:
        raise ValueError("eta too large for the given M1, M2")
    d = b * c / a

    def padded(value, shape):
        out = np.zeros(shape)
        out[:r, :r] = value * np.eye(r)
        return out

    a11 = padded(a, (m1, m2))
    a12 = padded(c, (m1, p2 - m2))
    a21 = padded(b, (p1 - m1, m2))
    pair = []
    for sign in (1.0, -1.0):
        a22 = padded(d + sign * epsilon, (p1 - m1, p2 - m2))
        pair.append(np.block([[a11, a12], [a21, a22]]))
    return pair[0], pair[1]
