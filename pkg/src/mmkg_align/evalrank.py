"""
Ranking evaluation: Hits@N, MRR and MR of gold pairs.

The rank of gold pair (i, j) counts the candidates scoring strictly higher plus the equal-scoring
candidates with a smaller column index, so ties resolve like ``row_argmax``.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field

from .core.errors import AlignmentError, ShapeError
from .kgio import AlignmentSet
from .matrix import DenseMatrix


class EvalReport(BaseModel):
    """Ranking metrics over ``n_evaluated`` gold pairs."""

    hits: dict[int, float] = Field(default_factory=dict, description="N -> fraction of gold ranked within N")
    mrr: float = Field(description="Mean reciprocal rank")
    mr: float = Field(description="Mean rank")
    n_evaluated: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "hits": {str(n): self.hits[n] for n in sorted(self.hits)},
            "mrr": self.mrr,
            "mr": self.mr,
            "n": self.n_evaluated,
        }

    @classmethod
    def from_ranks(cls, ranks: npt.NDArray[np.float64], ns: Sequence[int]) -> "EvalReport":
        if len(ranks) == 0:
            raise AlignmentError("evaluate: empty gold set")
        return cls(
            hits={int(n): float(np.mean(ranks <= n)) for n in sorted(set(ns))},
            mrr=float(np.mean(1.0 / ranks)),
            mr=float(np.mean(ranks)),
            n_evaluated=len(ranks),
        )

    @classmethod
    def average(cls, a: "EvalReport", b: "EvalReport") -> "EvalReport":
        """Mean of two directional reports over the same N values."""
        return cls(
            hits={n: (a.hits[n] + b.hits[n]) / 2 for n in a.hits},
            mrr=(a.mrr + b.mrr) / 2,
            mr=(a.mr + b.mr) / 2,
            n_evaluated=a.n_evaluated,
        )


def gold_ranks(scores: DenseMatrix, gold: AlignmentSet) -> npt.NDArray[np.float64]:
    """1-based rank of each gold target within its source row."""
    if len(gold) == 0:
        raise AlignmentError("evaluate: empty gold set")
    src, tgt = gold.as_arrays()
    rows, cols = scores.shape
    if src.max() >= rows or tgt.max() >= cols:
        raise ShapeError(f"evaluate: gold index out of range for a {rows}x{cols} score matrix")
    row_scores = scores[src]
    target = row_scores[np.arange(len(src)), tgt][:, None]
    higher = (row_scores > target).sum(axis=1)
    tied_before = ((row_scores == target) & (np.arange(cols)[None, :] < tgt[:, None])).sum(axis=1)
    return (1 + higher + tied_before).astype(np.float64)


def evaluate(
    scores: DenseMatrix,
    gold: AlignmentSet,
    ns: Sequence[int] = (1, 5, 10),
    both_directions: bool = False,
) -> EvalReport:
    """Rank every gold target among all target entities of its source row."""
    forward = EvalReport.from_ranks(gold_ranks(scores, gold), ns)
    if not both_directions:
        return forward
    backward = EvalReport.from_ranks(gold_ranks(scores.T, gold.swapped()), ns)
    return EvalReport.average(forward, backward)


def evaluate_predictions(
    predictions: AlignmentSet,
    gold: AlignmentSet,
    n_candidates: int,
    ns: Sequence[int] = (1, 5, 10),
) -> EvalReport:
    """Score a prediction list: a correct prediction ranks 1, a wrong or missing one ranks last."""
    if len(gold) == 0:
        raise AlignmentError("evaluate: empty gold set")
    predicted = dict(predictions.pairs)
    ranks = np.array(
        [1.0 if predicted.get(s) == t else float(max(n_candidates, 1)) for s, t in gold.pairs],
        dtype=np.float64,
    )
    return EvalReport.from_ranks(ranks, ns)
