"""Structured matrix completion: recover a missing block from fully observed
rows and columns of an approximately low-rank matrix."""

from .matlin import INF, schatten_norm, svd
from .smc import (
    BlockPartition,
    Mode,
    SmcResult,
    ThresholdPolicy,
    default_threshold,
    estimate_rank,
    recover_known_rank,
    recover_unknown_rank,
    schur_complete,
    transform_blocks,
)

__all__ = [
    "INF",
    "BlockPartition",
    "Mode",
    "SmcResult",
    "ThresholdPolicy",
    "default_threshold",
    "estimate_rank",
    "recover_known_rank",
    "recover_unknown_rank",
    "schatten_norm",
    "schur_complete",
    "svd",
    "transform_blocks",
]
