"""
Modality similarity paths.

Every modality yields an |E_s| x |E_t| matrix by composing three similarities:
entity -> source item, source item -> target item, target item -> entity. The composition is a
matrix product (sum paths: relational, attribute, temporal) or a max-product (visual).
"""

import math
import time
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core.config import ModalityKind, PipelineConfig
from .core.errors import AlignmentError, ModalityUnavailableError, ShapeError
from .core.logging import get_logger
from .encoders import get_encoder, normalized_adjacency, propagate
from .kgio import AlignmentSet, FeatureTable, KgPair, Mmkg
from .matrix import DenseMatrix, matmul, max_compose, row_l2_normalize

logger = get_logger("mmkg-align.msp")

SimMatrix = DenseMatrix
SIDE_MODALITIES = (ModalityKind.VISUAL, ModalityKind.ATTRIBUTE, ModalityKind.TEMPORAL)


def _features(table: FeatureTable, cosine: bool) -> DenseMatrix:
    return row_l2_normalize(table.matrix) if cosine else table.matrix


# ============================================================================
# RELATIONAL
# ============================================================================


def build_relational(pair: KgPair, anchors: AlignmentSet, config: PipelineConfig) -> SimMatrix:
    """M_R = H_s H_t^T with the configured encoder (rows already unit length)."""
    encoder = get_encoder(config.encoder)
    h_s, h_t = encoder(pair, anchors, config)
    if h_s.shape[0] != pair.source.n_entities or h_t.shape[0] != pair.target.n_entities:
        raise ShapeError(f"encoder '{config.encoder}' returned {h_s.shape}/{h_t.shape} for the entity counts")
    return matmul(row_l2_normalize(h_s), row_l2_normalize(h_t).T)


# ============================================================================
# VISUAL
# ============================================================================


def image_membership(graph: Mmkg, n_rows: int) -> DenseMatrix:
    """Binary entity x image-row matrix from the entity-image links."""
    member = np.zeros((graph.n_entities, n_rows))
    for ent, row in graph.entity_images:
        member[ent, row] = 1.0
    return member


def build_visual(
    pair: KgPair,
    feats: tuple[FeatureTable, FeatureTable] | None,
    config: PipelineConfig,
) -> SimMatrix:
    """Cross-graph image similarity aggregated over image pairs.

    The best pair counts by default; ``visual_operator="sum"`` adds up every pair instead.
    """
    if feats is None:
        raise ModalityUnavailableError(f"visual features missing ({pair.unavailable.get(ModalityKind.VISUAL)})")
    feat_s, feat_t = feats
    if feat_s.dim != feat_t.dim:
        raise ShapeError(f"visual feature dimensions differ: {feat_s.dim} vs {feat_t.dim}")
    cross = _features(feat_s, config.cosine) @ _features(feat_t, config.cosine).T
    m_s = image_membership(pair.source, feat_s.matrix.shape[0])
    m_t = image_membership(pair.target, feat_t.matrix.shape[0])
    if config.visual_operator == "sum":
        return matmul(matmul(m_s, cross), m_t.T)
    return max_compose(m_s, cross, m_t)


# ============================================================================
# ATTRIBUTE
# ============================================================================


def parse_number(text: str) -> float | None:
    """Decimal value of ``text`` or None when it is not a finite number."""
    try:
        value = float(text.strip())
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def attribute_items(graph: Mmkg) -> tuple[list[tuple[int, str]], DenseMatrix]:
    """Distinct (name, value) items in sorted order and the binary entity x item membership."""
    items = sorted({(name, value) for _, name, value in graph.attr_triples})
    index = {item: k for k, item in enumerate(items)}
    member = np.zeros((graph.n_entities, len(items)))
    for ent, name, value in graph.attr_triples:
        member[ent, index[(name, value)]] = 1.0
    return items, member


def value_similarity(values_s: list[str], values_t: list[str], epsilon_v: float) -> DenseMatrix:
    """1 / max(|v_i - v_j|, eps) for numeric pairs; raw string equality otherwise."""
    num_s = [parse_number(v) for v in values_s]
    num_t = [parse_number(v) for v in values_t]
    is_num_s = np.array([v is not None for v in num_s], dtype=bool)
    is_num_t = np.array([v is not None for v in num_t], dtype=bool)
    arr_s = np.array([v if v is not None else 0.0 for v in num_s])
    arr_t = np.array([v if v is not None else 0.0 for v in num_t])

    diff = np.abs(arr_s[:, None] - arr_t[None, :])
    numeric = 1.0 / np.maximum(diff, epsilon_v)
    raw_s = np.array([v.encode("utf-8") for v in values_s], dtype=object)
    raw_t = np.array([v.encode("utf-8") for v in values_t], dtype=object)
    equal = (raw_s[:, None] == raw_t[None, :]).astype(np.float64)
    both_numeric = is_num_s[:, None] & is_num_t[None, :]
    return np.where(both_numeric, numeric, equal)


def build_attribute(
    pair: KgPair,
    name_feats: tuple[FeatureTable, FeatureTable] | None,
    config: PipelineConfig,
) -> SimMatrix:
    """Sum path over (name, value) items: M_A = M_s (nameSim * valueSim) M_t^T."""
    if name_feats is None:
        raise ModalityUnavailableError(
            f"attribute name features missing ({pair.unavailable.get(ModalityKind.ATTRIBUTE)})"
        )
    names_s, names_t = name_feats
    if names_s.dim != names_t.dim:
        raise ShapeError(f"attribute name embedding dimensions differ: {names_s.dim} vs {names_t.dim}")
    for side, graph, table in (("source", pair.source, names_s), ("target", pair.target, names_t)):
        rows = table.matrix.shape[0]
        bad = [name for _, name, _ in graph.attr_triples if name >= rows]
        if bad:
            raise AlignmentError(f"{side} attribute name {min(bad)} has no embedding row ({rows} rows)")

    items_s, member_s = attribute_items(pair.source)
    items_t, member_t = attribute_items(pair.target)
    if not items_s or not items_t:
        return np.zeros((pair.source.n_entities, pair.target.n_entities))

    name_idx_s = np.array([name for name, _ in items_s])
    name_idx_t = np.array([name for name, _ in items_t])
    emb_s = _features(names_s, config.cosine)[name_idx_s]
    emb_t = _features(names_t, config.cosine)[name_idx_t]
    name_sim = emb_s @ emb_t.T
    value_sim = value_similarity([v for _, v in items_s], [v for _, v in items_t], config.epsilon_v)
    cross = name_sim * value_sim
    return matmul(matmul(member_s, cross), member_t.T)


# ============================================================================
# TEMPORAL
# ============================================================================


def entity_timestamp_counts(graph: Mmkg, n_timestamps: int) -> DenseMatrix:
    """Count of timestamped quadruples in which each entity is head or tail."""
    counts = np.zeros((graph.n_entities, n_timestamps))
    timed = graph.timed_quads
    if len(timed):
        heads, tails, taus = timed[:, 0], timed[:, 2], timed[:, 3]
        np.add.at(counts, (heads, taus), 1.0)
        loops = heads == tails
        np.add.at(counts, (tails[~loops], taus[~loops]), 1.0)
    return counts


def temporal_features(graph: Mmkg, n_timestamps: int, hops: int) -> DenseMatrix:
    """Theta = [A At | A^2 At | ... | A^L At], rows L2-normalized."""
    theta = propagate(normalized_adjacency(graph), entity_timestamp_counts(graph, n_timestamps), hops)
    return row_l2_normalize(theta)


def build_temporal(pair: KgPair, config: PipelineConfig) -> SimMatrix:
    """M_T = Theta_s Theta_t^T over the shared timestamp vocabulary."""
    if pair.n_timestamps == 0 or len(pair.source.timed_quads) == 0 or len(pair.target.timed_quads) == 0:
        raise ModalityUnavailableError(
            f"temporal modality needs timestamped quadruples ({pair.unavailable.get(ModalityKind.TEMPORAL, 'none found')})"
        )
    theta_s = temporal_features(pair.source, pair.n_timestamps, config.hops_L)
    theta_t = temporal_features(pair.target, pair.n_timestamps, config.hops_L)
    return matmul(theta_s, theta_t.T)


# ============================================================================
# ALL MODALITIES
# ============================================================================


def _builders(
    pair: KgPair, inputs: Mapping[str, object] | None, anchors: AlignmentSet, config: PipelineConfig
) -> dict[ModalityKind, Callable[[], SimMatrix]]:
    inputs = inputs or {}
    image_feats = inputs.get("image_features", pair.image_features)
    name_feats = inputs.get("attr_name_features", pair.attr_name_features)
    return {
        ModalityKind.RELATIONAL: lambda: build_relational(pair, anchors, config),
        ModalityKind.VISUAL: lambda: build_visual(pair, image_feats, config),  # type: ignore[arg-type]
        ModalityKind.ATTRIBUTE: lambda: build_attribute(pair, name_feats, config),  # type: ignore[arg-type]
        ModalityKind.TEMPORAL: lambda: build_temporal(pair, config),
    }


def build_all(
    pair: KgPair,
    inputs: Mapping[str, object] | None,
    anchors: AlignmentSet,
    config: PipelineConfig,
    kinds: set[ModalityKind] | None = None,
) -> dict[ModalityKind, SimMatrix]:
    """One matrix per enabled and available modality (optionally restricted to ``kinds``)."""
    wanted = [k for k in ModalityKind if config.enabled(k) and (kinds is None or k in kinds)]
    selected = []
    for kind in wanted:
        if not pair.available(kind):
            logger.warning("modality.unavailable", modality=kind.value, missing=pair.unavailable[kind])
            continue
        selected.append(kind)
    if not selected:
        missing = "; ".join(f"{k.value}: {pair.unavailable[k]}" for k in wanted if k in pair.unavailable)
        raise ModalityUnavailableError(f"no available modality to build ({missing or 'none enabled'})")

    builders = _builders(pair, inputs, anchors, config)

    def run(kind: ModalityKind) -> SimMatrix:
        started = time.perf_counter()
        matrix = builders[kind]()
        logger.debug("modality.built", modality=kind.value, shape=list(matrix.shape),
                     elapsed_s=round(time.perf_counter() - started, 4))
        return matrix

    if config.workers > 1 and len(selected) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run, selected))
    else:
        results = [run(kind) for kind in selected]
    return dict(zip(selected, results, strict=True))
