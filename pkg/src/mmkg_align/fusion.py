"""Fusion of modality matrices: (optionally pre-scaled) sum followed by k-step Sinkhorn scaling."""

from collections.abc import Mapping

import numpy as np

from .core.config import ModalityKind, PipelineConfig
from .core.errors import ShapeError
from .core.logging import get_logger
from .matrix import DenseMatrix, minmax_scale

logger = get_logger("mmkg-align.fusion")

_TINY = np.finfo(np.float64).tiny


def sinkhorn(x: DenseMatrix, k: int) -> DenseMatrix:
    """exp(x - max x), then ``k`` rounds of row normalization followed by column normalization.

    Rectangular inputs divide every row/column by its own sum. Entries are floored at the smallest
    positive float so the plan stays strictly positive when exp underflows.
    """
    if x.size == 0:
        raise ShapeError("sinkhorn: empty matrix")
    if k < 1:
        raise ValueError(f"sinkhorn: k must be >= 1, got {k}")
    plan = np.maximum(np.exp(x - x.max()), _TINY)
    for _ in range(k):
        plan /= plan.sum(axis=1, keepdims=True)
        plan /= plan.sum(axis=0, keepdims=True)
        np.maximum(plan, _TINY, out=plan)
    return plan


def summed(matrices: Mapping[ModalityKind, DenseMatrix], prescale: bool) -> DenseMatrix:
    """Elementwise sum in fixed modality order, min-max scaling each term first when asked."""
    if not matrices:
        raise ShapeError("fuse: no modality matrices")
    shapes = {kind.value: m.shape for kind, m in matrices.items()}
    if len(set(shapes.values())) != 1:
        raise ShapeError(f"fuse: modality shapes differ: {shapes}")
    total = None
    for kind in ModalityKind:
        if kind not in matrices:
            continue
        term = minmax_scale(matrices[kind]) if prescale else matrices[kind]
        total = term.copy() if total is None else total + term
    return total


def fuse(matrices: Mapping[ModalityKind, DenseMatrix], config: PipelineConfig) -> DenseMatrix:
    """M = Sinkhorn(sum of modality matrices)."""
    fused = sinkhorn(summed(matrices, config.prescale), config.sinkhorn_k)
    logger.debug("fusion.done", modalities=sorted(k.value for k in matrices), shape=list(fused.shape))
    return fused


def fuse_both_directions(
    matrices: Mapping[ModalityKind, DenseMatrix], config: PipelineConfig
) -> tuple[DenseMatrix, DenseMatrix]:
    """Forward M (source x target) and an independently fused backward M' (target x source)."""
    forward = fuse(matrices, config)
    backward = fuse({kind: m.T for kind, m in matrices.items()}, config)
    return forward, backward
