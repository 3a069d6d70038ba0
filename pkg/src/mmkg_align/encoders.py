"""
Relational encoders.

An encoder maps (pair, anchors, config) to entity embeddings H_s, H_t living in one shared space.
Encoders are looked up by name so the relational backbone can be swapped from configuration.
"""

from collections.abc import Callable

import numpy as np
import numpy.typing as npt

from .core.config import PipelineConfig
from .core.errors import ConfigError, ModalityUnavailableError
from .kgio import AlignmentSet, KgPair, Mmkg
from .matrix import DenseMatrix, row_l2_normalize

RelationalEncoder = Callable[[KgPair, AlignmentSet, PipelineConfig], tuple[DenseMatrix, DenseMatrix]]

_ENCODERS: dict[str, RelationalEncoder] = {}


def register_encoder(name: str) -> Callable[[RelationalEncoder], RelationalEncoder]:
    """Decorator adding an encoder to the registry under ``name``."""

    def decorator(fn: RelationalEncoder) -> RelationalEncoder:
        _ENCODERS[name] = fn
        return fn

    return decorator


def get_encoder(name: str) -> RelationalEncoder:
    if name not in _ENCODERS:
        raise ConfigError(f"Unknown relational encoder '{name}' (available: {', '.join(sorted(_ENCODERS))})")
    return _ENCODERS[name]


def available_encoders() -> list[str]:
    return sorted(_ENCODERS)


def normalized_adjacency(graph: Mmkg) -> DenseMatrix:
    """Row-normalized undirected head-tail adjacency with self-loops; relation labels ignored."""
    n = graph.n_entities
    adj = np.eye(n, dtype=np.float64)
    if len(graph.quads):
        heads, tails = graph.quads[:, 0], graph.quads[:, 2]
        adj[heads, tails] = 1.0
        adj[tails, heads] = 1.0
    return adj / adj.sum(axis=1, keepdims=True)


def propagate(adj: DenseMatrix, features: DenseMatrix, hops: int) -> DenseMatrix:
    """Concatenate [A F | A^2 F | ... | A^L F] column-wise."""
    blocks = []
    current = features
    for _ in range(hops):
        current = adj @ current
        blocks.append(current)
    return np.concatenate(blocks, axis=1)


def _require_anchors(anchors: AlignmentSet) -> None:
    if len(anchors) == 0:
        raise ModalityUnavailableError("relational encoder needs at least one anchor pair (seeds_train is empty)")


def anchor_vector(global_seed: int, src: int, dim: int) -> npt.NDArray[np.float64]:
    """Deterministic pseudo-random unit vector for the anchor pair whose source is ``src``.

    Keyed by the source id alone (anchors are one-to-one), so relabeling target entities or adding
    another anchor leaves this vector unchanged.
    """
    rng = np.random.default_rng([global_seed, src])
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _encode(pair: KgPair, init_s: DenseMatrix, init_t: DenseMatrix, hops: int) -> tuple[DenseMatrix, DenseMatrix]:
    h_s = propagate(normalized_adjacency(pair.source), init_s, hops)
    h_t = propagate(normalized_adjacency(pair.target), init_t, hops)
    return row_l2_normalize(h_s), row_l2_normalize(h_t)


@register_encoder("propagation")
def seed_anchored_propagation(
    pair: KgPair, anchors: AlignmentSet, config: PipelineConfig
) -> tuple[DenseMatrix, DenseMatrix]:
    """Anchor pairs share a random unit vector; everything else starts at zero and is reached by propagation."""
    _require_anchors(anchors)
    d = config.embed_dim_d
    init_s = np.zeros((pair.source.n_entities, d))
    init_t = np.zeros((pair.target.n_entities, d))
    for src, tgt in sorted(anchors.pairs):
        v = anchor_vector(config.global_seed, src, d)
        init_s[src] = v
        init_t[tgt] = v
    return _encode(pair, init_s, init_t, config.hops_L)


@register_encoder("anchor_onehot")
def anchor_indicator_propagation(
    pair: KgPair, anchors: AlignmentSet, config: PipelineConfig
) -> tuple[DenseMatrix, DenseMatrix]:
    """One indicator column per anchor pair instead of a random projection."""
    _require_anchors(anchors)
    ordered = sorted(anchors.pairs)
    init_s = np.zeros((pair.source.n_entities, len(ordered)))
    init_t = np.zeros((pair.target.n_entities, len(ordered)))
    for col, (src, tgt) in enumerate(ordered):
        init_s[src, col] = 1.0
        init_t[tgt, col] = 1.0
    return _encode(pair, init_s, init_t, config.hops_L)
