"""Replicated simulation runs, loss metrics and aggregation."""
from __future__ import annotations

import dataclasses
import itertools
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import matlin, nnm, smc, synth
from .matlin import INF

WORKERS_ENV = "SMC_WORKERS"


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation point.

    ``solvers`` entries are ``"smc-row"``, ``"smc-col"``, ``"smc-rank:<r>"``
    (known-rank estimator) and ``"nnm"``. The SMC threshold is
    ``threshold_const * sqrt(p/m)`` on the side being thresholded.
    """

    p1: int
    p2: int
    m1: int
    m2: int
    spectrum: synth.SpectrumProfile
    scheme: synth.SamplingScheme = synth.FIRST_ROWS_COLS
    solvers: Tuple[str, ...] = ("smc-row",)
    threshold_const: float = 2.0
    reps: int = 200
    base_seed: int = 0
    nnm_folds: int = 5
    nnm_grid: int = 10
    nnm_splits: int = 5
    nnm_tol: float = 1e-5
    nnm_max_iter: int = 500

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.threshold_const > 0:
            raise ValueError("threshold_const must be positive")
        if not (0 < self.m1 < self.p1 and 0 < self.m2 < self.p2):
            raise ValueError("need 0 < m1 < p1 and 0 < m2 < p2")
        object.__setattr__(self, "solvers", tuple(self.solvers))
        for name in self.solvers:
            _parse_solver(name)


@dataclass
class RunRecord:
    solver: str
    rep: int
    seed: int
    r_hat: Optional[int]
    spectral_loss: float
    frobenius_loss: float
    nuclear_loss: float
    rel_spectral: float
    rel_frobenius: float
    rel_nuclear: float
    wall_time: float
    error: Optional[str] = None


def _parse_solver(name: str):
    if name in ("smc-row", "smc-col", "nnm"):
        return name, None
    if name.startswith("smc-rank:"):
        try:
            r = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad known-rank solver id {name!r}") from None
        if r < 1:
            raise ValueError(f"bad known-rank solver id {name!r}")
        return "smc-rank", r
    raise ValueError(f"unknown solver {name!r}")


def replication_seeds(base_seed: int, rep: int) -> Tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent streams for instance generation and for solver randomness.

    Derived from ``(base_seed, rep)`` only, so adding or removing solvers
    never changes the generated instance.
    """
    return (
        np.random.SeedSequence(base_seed, spawn_key=(rep, 0)),
        np.random.SeedSequence(base_seed, spawn_key=(rep, 1)),
    )


def generate(cfg: ExperimentConfig, rep: int):
    """The instance for replication ``rep``: ``(blocks, seed)``."""
    inst_ss, _ = replication_seeds(cfg.base_seed, rep)
    rng = np.random.default_rng(inst_ss)
    A = synth.make_instance(cfg.p1, cfg.p2, cfg.spectrum, rng)
    blocks, _, _ = synth.split_blocks(A, cfg.m1, cfg.m2, cfg.scheme, rng)
    return blocks, int(inst_ss.generate_state(1)[0])


def losses(a22_hat: np.ndarray, a22: np.ndarray) -> Dict[str, float]:
    err = matlin.singular_values(a22_hat - a22)
    ref = matlin.singular_values(a22)
    out = {}
    for key, q in (("spectral", INF), ("frobenius", 2), ("nuclear", 1)):
        e = matlin.schatten_from_sigma(err, q)
        n = matlin.schatten_from_sigma(ref, q)
        out[f"{key}_loss"] = e
        out[f"rel_{key}"] = e / n if n > 0 else math.inf
    return out


def _solve(name: str, blocks: smc.BlockPartition, cfg: ExperimentConfig, solver_seed):
    kind, r = _parse_solver(name)
    observed = blocks.observed_only()
    if kind == "smc-row" or kind == "smc-col":
        mode = smc.Mode.ROW if kind == "smc-row" else smc.Mode.COL
        policy = smc.ThresholdPolicy.default(observed, mode, cfg.threshold_const)
        res = smc.recover_unknown_rank(observed, policy)
        return res.a22_hat, res.r_hat
    if kind == "smc-rank":
        return smc.recover_known_rank(observed, r), r
    nnm_cfg = nnm.NnmConfig(0.0, cfg.nnm_tol, cfg.nnm_max_iter)
    a22_hat = nnm.nnm_complete(
        observed, cfg.nnm_folds, cfg.nnm_grid, cfg.nnm_splits, solver_seed, nnm_cfg
    )
    return a22_hat, None


def run_replication(cfg: ExperimentConfig, rep: int) -> List[RunRecord]:
    """Run every configured solver on replication ``rep``.

    Solver failures are captured in ``RunRecord.error`` with NaN losses.
    """
    blocks, seed = generate(cfg, rep)
    _, solver_ss = replication_seeds(cfg.base_seed, rep)
    records = []
    for name in cfg.solvers:
        start = time.perf_counter()
        try:
            a22_hat, r_hat = _solve(name, blocks, cfg, solver_ss)
            metrics = losses(a22_hat, blocks.a22)
            error = None
        except (np.linalg.LinAlgError, ValueError) as exc:
            r_hat = None
            metrics = {k: math.nan for k in _LOSS_KEYS}
            error = f"{type(exc).__name__}: {exc}"
        records.append(
            RunRecord(name, rep, seed, r_hat, wall_time=time.perf_counter() - start,
                      error=error, **metrics)
        )
    return records


_LOSS_KEYS = (
    "spectral_loss", "frobenius_loss", "nuclear_loss",
    "rel_spectral", "rel_frobenius", "rel_nuclear",
)


@dataclass
class Stat:
    mean: float
    sd: float
    se: float
    n: int


def describe(values: Sequence[float]) -> Stat:
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=np.float64)
    n = x.size
    if n == 0:
        return Stat(math.nan, math.nan, math.nan, 0)
    mean = float(x.mean())
    sd = float(x.std(ddof=1)) if n > 1 else 0.0
    return Stat(mean, sd, sd / math.sqrt(n), n)


@dataclass
class SolverSummary:
    solver: str
    reps: int
    failures: int
    stats: Dict[str, Stat]
    mean_r_hat: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summaries: List[SolverSummary]
    records: List[RunRecord] = field(default_factory=list)

    def summary(self, solver: str) -> SolverSummary:
        for s in self.summaries:
            if s.solver == solver:
                return s
        raise KeyError(solver)


def aggregate(cfg: ExperimentConfig, records: Iterable[RunRecord]) -> List[SolverSummary]:
    # sort first so the result does not depend on completion order
    records = sorted(records, key=lambda r: (r.rep, cfg.solvers.index(r.solver)))
    out = []
    for name in cfg.solvers:
        mine = [r for r in records if r.solver == name]
        stats = {k: describe([getattr(r, k) for r in mine]) for k in _LOSS_KEYS}
        ranks = [r.r_hat for r in mine if r.r_hat is not None]
        out.append(
            SolverSummary(
                name,
                len(mine),
                sum(r.error is not None for r in mine),
                stats,
                float(np.mean(ranks)) if ranks else math.nan,
            )
        )
    return out


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value is None:
        return 1
    return max(1, int(value))


def _run_one(args):
    cfg, rep = args
    return run_replication(cfg, rep)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> ExperimentResult:
    """All replications of ``cfg``, aggregated per solver.

    ``workers > 1`` distributes replications over processes; the output is
    identical either way.
    """
    workers = default_workers() if workers is None else workers
    jobs = [(cfg, rep) for rep in range(cfg.reps)]
    if workers > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_one, jobs))
    else:
        batches = [_run_one(job) for job in jobs]
    records = [r for batch in batches for r in batch]
    records.sort(key=lambda r: (r.rep, cfg.solvers.index(r.solver)))
    return ExperimentResult(cfg, aggregate(cfg, records), records)


# --- sweeps ------------------------------------------------------------------

SWEEP_KEYS = ("p1", "p2", "m1", "m2", "p", "m", "r", "g", "alpha", "threshold_const")


def with_params(cfg: ExperimentConfig, **params) -> ExperimentConfig:
    """Copy of ``cfg`` with sweep parameters substituted.

    ``p``/``m`` set both dimensions; ``r``/``g``/``alpha`` rebuild the spectrum.
    """
    updates = {}
    spectrum = cfg.spectrum
    for key, value in params.items():
        if key == "p":
            updates["p1"] = updates["p2"] = int(value)
        elif key == "m":
            updates["m1"] = updates["m2"] = int(value)
        elif key in ("p1", "p2", "m1", "m2"):
            updates[key] = int(value)
        elif key == "threshold_const":
            updates[key] = float(value)
        elif key == "alpha":
            spectrum = synth.Power(float(value))
        elif key in ("r", "g"):
            if not isinstance(spectrum, synth.Gap):
                spectrum = synth.Gap(r=1, g=1.0)
            spectrum = dataclasses.replace(
                spectrum, **{key: int(value) if key == "r" else float(value)}
            )
        else:
            raise ValueError(f"unknown sweep parameter {key!r}")
    return dataclasses.replace(cfg, spectrum=spectrum, **updates)


def sweep_points(sweep: Dict[str, Sequence]) -> List[Dict[str, object]]:
    """Cartesian product of the sweep lists, in key order."""
    if not sweep:
        return [{}]
    keys = list(sweep)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(sweep[k] for k in keys))]


# --- subspace comparison -----------------------------------------------------

def subspace_alignment(U_est, U_true, k: int) -> np.ndarray:
    """Canonical correlations between the leading ``k`` columns of two bases."""
    U_est = np.asarray(U_est, dtype=np.float64)
    U_true = np.asarray(U_true, dtype=np.float64)
    if U_est.shape[0] != U_true.shape[0]:
        raise ValueError("bases must have the same number of rows")
    if not 1 <= k <= min(U_est.shape[1], U_true.shape[1]):
        raise ValueError(f"k must lie in [1, {min(U_est.shape[1], U_true.shape[1])}]")
    s = matlin.singular_values(U_est[:, :k].T @ U_true[:, :k])
    return np.clip(s, 0.0, 1.0)
