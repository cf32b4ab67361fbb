"""Penalized nuclear-norm minimization baseline.

Solves ``min_Z 1/2 sum_{(i,j) in Omega} (Z_ij - A_ij)^2 + t ||Z||_*`` by
soft-impute: fill the unobserved entries with the current iterate, then
soft-threshold the singular values. The tuning parameter is picked by
row-split cross-validation over a log grid below the spectral norm of the
zero-filled observations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple

import numpy as np
import scipy.linalg

from . import matlin
from .smc import BlockPartition

log = logging.getLogger(__name__)


class CrossValidationError(ValueError):
    pass


@dataclass(frozen=True)
class ObservationMask:
    observed: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=bool)
        if obs.ndim != 2:
            raise ValueError("mask must be 2-dimensional")
        if not obs.any():
            raise ValueError("mask observes no entries")
        object.__setattr__(self, "observed", obs)

    @property
    def shape(self):
        return self.observed.shape

    @classmethod
    def smc(cls, p1: int, p2: int, m1: int, m2: int, rows=None) -> "ObservationMask":
        """All of the first ``m2`` columns plus the first ``m1`` rows.

        ``rows`` restricts which of the first ``m1`` rows count as observed
        outside the first ``m2`` columns.
        """
        obs = np.zeros((p1, p2), dtype=bool)
        obs[:, :m2] = True
        obs[np.arange(m1) if rows is None else np.asarray(rows), m2:] = True
        return cls(obs)


@dataclass(frozen=True)
class NnmConfig:
    t: float = 0.0
    tol: float = 1e-5
    max_iter: int = 500

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass
class NnmFit:
    Z: np.ndarray
    converged: bool
    n_iter: int
    objective: List[float] = field(default_factory=list)
    rank: int = 0
    factors: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = field(
        default=None, repr=False
    )


def soft_threshold_svd(M, t: float) -> np.ndarray:
    """``U diag(max(sigma - t, 0)) V^T``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    U, s, V = matlin.svd(M)
    shrunk = np.maximum(s - t, 0.0)
    k = int(np.count_nonzero(shrunk))
    return (U[:, :k] * shrunk[:k]) @ V[:, :k].T


def _svt_factors(C: np.ndarray, t: float, rank_hint: int):
    """Factors ``(U, sigma - t, V)`` of the soft-thresholded ``C``, kept part only.

    For ``t`` well above rounding level the map is evaluated through the
    eigendecomposition of the smaller Gram matrix: about twice as fast as an
    SVD, with singular values near the cut accurate to ``eps sigma_1^2 / t``.
    When the previous rank is small only eigenpairs above ``t^2`` are computed.
    """
    scale = np.linalg.norm(C)
    if scale == 0:
        return np.zeros((C.shape[0], 0)), np.zeros(0), np.zeros((C.shape[1], 0))
    if t <= 1e-6 * scale:
        U, s, V = matlin.svd(C)
        k = int(np.count_nonzero(s > t))
        return U[:, :k], s[:k] - t, V[:, :k]
    tall = C.shape[0] >= C.shape[1]
    G = C.T @ C if tall else C @ C.T
    if rank_hint < G.shape[0] // 8:
        lam, W = scipy.linalg.eigh(
            G, subset_by_value=(t * t, np.inf), driver="evr", check_finite=False
        )
    else:
        lam, W = scipy.linalg.eigh(G, driver="evd", check_finite=False)
    keep = lam > t * t
    # reversed views have negative strides, which BLAS handles very slowly
    lam, W = lam[keep][::-1], np.ascontiguousarray(W[:, keep][:, ::-1])
    sigma = np.sqrt(lam)
    other = (C @ W if tall else C.T @ W) / sigma
    if tall:
        return other, sigma - t, W
    return W, sigma - t, other


def _span_basis(B: np.ndarray, extra: np.ndarray) -> np.ndarray:
    """Orthonormal basis containing the columns of ``B`` and of ``extra``.

    ``extra`` (warm-start factors) usually lies in ``span(B)`` already, in
    which case it adds no columns.
    """
    Q = np.linalg.qr(B)[0]
    if extra.shape[1] == 0:
        return Q
    resid = extra - Q @ (Q.T @ extra)
    if np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(extra)):
        return Q
    return np.linalg.qr(np.hstack([B, extra]))[0]


class _Reduction:
    """Exact reduction for masks whose missing part is a product set.

    Write the filled matrix as ``[[A_oo, A_om], [A_mo, Z_mm]]``. If ``Z_mm``
    has column space in ``span(Qb)`` and row space in ``span(Qc)``, where
    ``Qb`` contains the columns of ``A_mo`` and ``Qc`` the rows of ``A_om``,
    then so does every soft-thresholded iterate. The iteration can therefore
    run on the core ``[[A_oo, A_om Qc], [Qb^T A_mo, X]]`` with identical
    singular values, objective and step sizes.
    """

    def __init__(self, A_obs: np.ndarray, obs: np.ndarray, U, V):
        missing = ~obs
        row_any = missing.any(axis=1)
        col_any = missing.any(axis=0)
        self.shape = obs.shape
        self.product = bool(np.array_equal(missing, np.outer(row_any, col_any)))
        if not self.product:
            return
        ro, rm = np.flatnonzero(~row_any), np.flatnonzero(row_any)
        co, cm = np.flatnonzero(~col_any), np.flatnonzero(col_any)
        self.ro, self.rm, self.co, self.cm = ro, rm, co, cm
        A_om = A_obs[np.ix_(ro, cm)]
        A_mo = A_obs[np.ix_(rm, co)]
        self.Qb = _span_basis(A_mo, U[rm])
        self.Qc = _span_basis(A_om.T, V[cm])
        shape = (ro.size + self.Qb.shape[1], co.size + self.Qc.shape[1])
        self.core_obs = np.zeros(shape, dtype=bool)
        self.core_obs[: ro.size, :] = True
        self.core_obs[:, : co.size] = True
        self.core_A = np.zeros(shape)
        self.core_A[: ro.size, : co.size] = A_obs[np.ix_(ro, co)]
        self.core_A[: ro.size, co.size:] = A_om @ self.Qc
        self.core_A[ro.size:, : co.size] = self.Qb.T @ A_mo

    def worthwhile(self) -> bool:
        return self.product and self.core_obs.size < 0.9 * self.shape[0] * self.shape[1]

    def reduce_factors(self, U, V):
        Ur = np.vstack([U[self.ro], self.Qb.T @ U[self.rm]])
        Vr = np.vstack([V[self.co], self.Qc.T @ V[self.cm]])
        return Ur, Vr

    def lift(self, Uc, Vc):
        U = np.empty((self.shape[0], Uc.shape[1]))
        U[self.ro] = Uc[: self.ro.size]
        U[self.rm] = self.Qb @ Uc[self.ro.size:]
        V = np.empty((self.shape[1], Vc.shape[1]))
        V[self.co] = Vc[: self.co.size]
        V[self.cm] = self.Qc @ Vc[self.co.size:]
        return U, V


def penalized_objective(Z, A, mask: ObservationMask, t: float, nuclear=None) -> float:
    resid = np.where(mask.observed, Z - A, 0.0)
    if nuclear is None:
        nuclear = matlin.schatten_norm(Z, 1)
    return 0.5 * float(np.sum(resid ** 2)) + t * nuclear


def _factor(Z: np.ndarray):
    U, s, V = matlin.svd(Z)
    k = int(np.count_nonzero(s > 0))
    return U[:, :k], s[:k], V[:, :k]


def solve_penalized(A, mask: ObservationMask, cfg: NnmConfig, Z0=None) -> NnmFit:
    """Soft-impute iterations ``Z <- S_t(P_Omega(A) + P_Omega^perp(Z))``.

    Starts from zero unless ``Z0`` (a matrix or a previous :class:`NnmFit`)
    is given; stops once ``||Z_new - Z||_F <= tol * max(1, ||Z||_F)``.
    Entries of ``A`` outside the mask are ignored.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != mask.shape:
        raise ValueError(f"A has shape {A.shape}, mask has {mask.shape}")
    obs = mask.observed
    A_obs = np.where(obs, A, 0.0)
    if not np.all(np.isfinite(A_obs)):
        raise ValueError("observed entries must be finite")
    if Z0 is None:
        U, s, V = np.zeros((A.shape[0], 0)), np.zeros(0), np.zeros((A.shape[1], 0))
    elif isinstance(Z0, NnmFit):
        U, s, V = Z0.factors
    else:
        U, s, V = _factor(np.asarray(Z0, dtype=np.float64))
    red = _Reduction(A_obs, obs, U, V)
    if red.worthwhile():
        Uc, Vc = red.reduce_factors(U, V)
        fit = _iterate(red.core_A, red.core_obs, cfg, Uc, s, Vc)
        Uc, s, Vc = fit.factors
        U, V = red.lift(Uc, Vc)
        fit.Z = (U * s) @ V.T
        fit.factors = (U, s, V)
    else:
        fit = _iterate(A_obs, obs, cfg, U, s, V)
    if not fit.converged:
        log.warning("soft-impute hit max_iter=%d at t=%g", cfg.max_iter, cfg.t)
    return fit


def _iterate(A_obs, obs, cfg: NnmConfig, U, s, V) -> NnmFit:
    Z = (U * s) @ V.T
    fit_mask = ObservationMask(obs)
    objective = []
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        U, s, V = _svt_factors(np.where(obs, A_obs, Z), cfg.t, s.size)
        Z_new = (U * s) @ V.T
        objective.append(penalized_objective(Z_new, A_obs, fit_mask, cfg.t, float(s.sum())))
        delta = np.linalg.norm(Z_new - Z)
        scale = max(1.0, np.linalg.norm(Z))
        Z = Z_new
        if delta <= cfg.tol * scale:
            converged = True
            break
    return NnmFit(Z, converged, n_iter, objective, int(s.size), (U, s, V))


def solve_path(A, mask: ObservationMask, grid, cfg: NnmConfig) -> Iterator[Tuple[float, NnmFit]]:
    """Fits along a descending ``t`` grid, each warm-started from the previous."""
    fit = None
    for t in grid:
        fit = solve_penalized(A, mask, NnmConfig(float(t), cfg.tol, cfg.max_iter), fit)
        yield float(t), fit


def t_grid(t_max: float, N: int) -> np.ndarray:
    """``t_max * 10^(-3k/N)`` for ``k = 0..N``."""
    if N < 1:
        raise CrossValidationError("N must be at least 1")
    return t_max * 10.0 ** (-3.0 * np.arange(N + 1) / N)


@dataclass
class CvResult:
    t_star: float
    grid: np.ndarray
    risk: np.ndarray


def row_splits(m1: int, K: int, H: int, rng: np.random.Generator):
    """``H`` random ``(train, held)`` splits of ``range(m1)``, ``|held| = m1 // K``."""
    held = m1 // K
    if held < 1 or held >= m1:
        raise CrossValidationError(
            f"cannot split {m1} rows into groups of ratio {K - 1}:1"
        )
    for _ in range(H):
        perm = rng.permutation(m1)
        yield np.sort(perm[held:]), np.sort(perm[:held])


def cv_select_t(blocks: BlockPartition, K: int = 5, N: int = 10, H: int = 5,
                seed=0, cfg: Optional[NnmConfig] = None) -> CvResult:
    """Pick ``t`` minimizing held-out squared error on ``A12`` rows.

    Each of the ``H`` random splits hides about ``m1/K`` of the observed rows
    in the ``A12`` block, fits the whole grid on the rest and scores the
    hidden entries; the risk is the mean over splits.
    """
    if K < 2 or H < 1:
        raise CrossValidationError("need K >= 2 and H >= 1")
    if blocks.m1 < K:
        raise CrossValidationError(f"m1={blocks.m1} is smaller than K={K}")
    cfg = cfg or NnmConfig()
    A_obs = blocks.assemble(np.zeros((blocks.p1 - blocks.m1, blocks.p2 - blocks.m2)))
    grid = t_grid(matlin.spectral_norm(A_obs), N)
    rng = np.random.default_rng(seed)
    risk = np.zeros(grid.size)
    m1, m2, p1, p2 = blocks.m1, blocks.m2, blocks.p1, blocks.p2
    right = np.arange(m2, p2)
    for train, held in row_splits(m1, K, H, rng):
        mask = ObservationMask.smc(p1, p2, m1, m2, rows=train)
        target = A_obs[np.ix_(held, right)]
        for i, (_, fit) in enumerate(solve_path(A_obs, mask, grid, cfg)):
            risk[i] += np.sum((fit.Z[np.ix_(held, right)] - target) ** 2)
    risk /= H
    return CvResult(float(grid[int(np.argmin(risk))]), grid, risk)


def fit_full(blocks: BlockPartition, t_star: float, grid=None,
             cfg: Optional[NnmConfig] = None, N: int = 10) -> NnmFit:
    """Fit on the full observation pattern at ``t_star``.

    Warm-starts along the grid values above ``t_star`` (the default grid
    has ``N`` steps below the spectral norm of the zero-filled data).
    """
    cfg = cfg or NnmConfig()
    A_obs = blocks.assemble(np.zeros((blocks.p1 - blocks.m1, blocks.p2 - blocks.m2)))
    mask = ObservationMask.smc(blocks.p1, blocks.p2, blocks.m1, blocks.m2)
    if grid is None:
        grid = t_grid(matlin.spectral_norm(A_obs), N)
    grid = np.asarray(grid, dtype=np.float64)
    path = np.append(grid[grid > t_star], t_star)
    fit = None
    for _, fit in solve_path(A_obs, mask, path, cfg):
        pass
    return fit


def nnm_complete(blocks: BlockPartition, K: int = 5, N: int = 10, H: int = 5,
                 seed=0, cfg: Optional[NnmConfig] = None) -> np.ndarray:
    """Cross-validated penalized NNM estimate of ``A22``."""
    cfg = cfg or NnmConfig()
    cv = cv_select_t(blocks, K, N, H, seed, cfg)
    fit = fit_full(blocks, cv.t_star, cv.grid, cfg)
    return fit.Z[blocks.m1:, blocks.m2:]
