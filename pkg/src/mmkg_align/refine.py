"""
Iterative refinement of the relational modality.

Each round re-encodes the relational path from the current anchors, fuses all modalities in both
directions, extracts mutual-argmax pseudo-seeds and adds the non-conflicting ones to the anchors.
Anchors only ever grow; original seeds are never displaced.
"""

import time
from collections.abc import Mapping, Set

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .core.config import ModalityKind, PipelineConfig
from .core.errors import InvariantViolation, ModalityUnavailableError, ShapeError
from .core.logging import get_logger
from .evalrank import evaluate
from .fusion import fuse_both_directions
from .kgio import AlignmentSet, KgPair
from .matrix import DenseMatrix, row_argmax
from .msp import build_relational

logger = get_logger("mmkg-align.refine")


class RoundRecord(BaseModel):
    """Bookkeeping for one refinement round."""

    round: int
    candidates: int
    accepted: int
    anchors: int
    elapsed_s: float
    hits_at_1: float | None = None
    mrr: float | None = None


class RefineState(BaseModel):
    """Loop state: current anchors, last forward/backward matrices and per-round history."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    round: int = 0
    anchors: AlignmentSet = Field(default_factory=AlignmentSet)
    forward: np.ndarray | None = None
    backward: np.ndarray | None = None
    history: list[RoundRecord] = Field(default_factory=list)

    @property
    def pseudo_seed_counts(self) -> list[int]:
        return [record.accepted for record in self.history]


def mutual_argmax_pairs(forward: DenseMatrix, backward: DenseMatrix) -> AlignmentSet:
    """Pairs (i, j) where j is row i's argmax in ``forward`` and i is row j's argmax in ``backward``."""
    if forward.shape != backward.T.shape:
        raise ShapeError(f"mutual_argmax_pairs: forward {forward.shape} vs backward {backward.shape}")
    if forward.size == 0:
        return AlignmentSet()
    best_t = row_argmax(forward)
    best_s = row_argmax(backward)
    src = np.flatnonzero(best_s[best_t] == np.arange(forward.shape[0]))
    tgt = best_t[src]
    return AlignmentSet(
        pairs=[(int(s), int(t)) for s, t in zip(src, tgt, strict=True)],
        scores=[float(forward[s, t]) for s, t in zip(src, tgt, strict=True)],
    )


def accept_candidates(
    anchors: AlignmentSet,
    candidates: AlignmentSet,
    blocked_sources: Set[int] = frozenset(),
    blocked_targets: Set[int] = frozenset(),
) -> AlignmentSet:
    """Candidates that touch no anchored entity and no blocked entity on either side."""
    used_s, used_t = anchors.sources, anchors.targets
    return AlignmentSet(
        pairs=[
            (s, t)
            for s, t in candidates.pairs
            if s not in used_s and t not in used_t and s not in blocked_sources and t not in blocked_targets
        ]
    )


def predict(forward: DenseMatrix, sources: list[int] | None = None) -> AlignmentSet:
    """Row argmax of ``forward`` for ``sources`` (all rows if None), scored by the fused value."""
    rows = list(range(forward.shape[0])) if sources is None else sorted(sources)
    best = row_argmax(forward)
    return AlignmentSet(
        pairs=[(r, int(best[r])) for r in rows],
        scores=[float(forward[r, best[r]]) for r in rows],
    )


def _predict_sources(pair: KgPair) -> list[int] | None:
    return sorted(pair.test_seeds.sources) if len(pair.test_seeds) else None


def refine_loop(
    pair: KgPair,
    side_matrices: Mapping[ModalityKind, DenseMatrix],
    config: PipelineConfig,
    initial_anchors: AlignmentSet | None = None,
) -> tuple[DenseMatrix, AlignmentSet, RefineState]:
    """Run ``config.refine_rounds`` rounds; returns the final forward matrix, predictions and state."""
    anchors = initial_anchors if initial_anchors is not None else pair.train_seeds
    if not anchors.is_one_to_one():
        raise InvariantViolation("initial anchors are not one-to-one")
    state = RefineState(anchors=AlignmentSet(pairs=list(anchors.pairs)))
    seeds = set(pair.train_seeds.pairs)

    blocked_s: Set[int] = frozenset()
    blocked_t: Set[int] = frozenset()
    if config.holdout_test_entities:
        blocked_s, blocked_t = pair.test_seeds.sources, pair.test_seeds.targets
    use_relational = config.enabled(ModalityKind.RELATIONAL)

    for rnd in range(1, config.refine_rounds + 1):
        started = time.perf_counter()
        matrices = dict(side_matrices)
        if use_relational:
            matrices[ModalityKind.RELATIONAL] = build_relational(pair, state.anchors, config)
        forward, backward = fuse_both_directions(matrices, config)

        candidates = mutual_argmax_pairs(forward, backward)
        accepted = AlignmentSet()
        if config.accept_pseudo:
            accepted = accept_candidates(state.anchors, candidates, blocked_s, blocked_t)
        state.anchors = state.anchors.union(accepted)
        state.round, state.forward, state.backward = rnd, forward, backward

        if not state.anchors.is_one_to_one() or not seeds <= set(state.anchors.pairs):
            raise InvariantViolation(f"round {rnd}: anchors lost injectivity or an original seed")

        record = RoundRecord(
            round=rnd,
            candidates=len(candidates),
            accepted=len(accepted),
            anchors=len(state.anchors),
            elapsed_s=round(time.perf_counter() - started, 4),
        )
        if len(pair.test_seeds):
            report = evaluate(forward, pair.test_seeds, ns=[1])
            record.hits_at_1, record.mrr = report.hits[1], report.mrr
        state.history.append(record)
        logger.info("refine.round", **record.model_dump())

        if len(accepted) == 0 and rnd < config.refine_rounds:
            # later rounds would see the same anchors and reproduce this one
            logger.info("refine.stopped", round=rnd, reason="no new anchors")
            break

    predictions = predict(state.forward, _predict_sources(pair))
    return state.forward, predictions, state


def bootstrap_unsupervised(
    pair: KgPair, side_matrices: Mapping[ModalityKind, DenseMatrix], config: PipelineConfig
) -> AlignmentSet:
    """Initial anchors from side modalities only: mutual argmax of the two fused directions."""
    side = {kind: m for kind, m in side_matrices.items() if kind != ModalityKind.RELATIONAL}
    if not side:
        raise ModalityUnavailableError("unsupervised bootstrap needs at least one side modality")
    forward, backward = fuse_both_directions(side, config)
    anchors = mutual_argmax_pairs(forward, backward)
    logger.info("bootstrap.anchors", anchors=len(anchors), modalities=sorted(k.value for k in side))
    return anchors
