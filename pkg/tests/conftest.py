"""
Test configuration and fixtures for mmkg-align.

Provides hand-built graph pairs, a dataset-directory writer and generated synthetic datasets.
"""

import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import pytest

from fixtures.sample_data import NOISE_FREE_SYNTH, NOISY_SYNTH, SMALL_SYNTH
from mmkg_align.core.config import ModalityKind, PipelineConfig
from mmkg_align.core.logging import configure_logging
from mmkg_align.evalrank import EvalReport
from mmkg_align.kgio import NO_TIME, AlignmentSet, FeatureTable, KgPair, Mmkg
from mmkg_align.synth import SynthSpec, generate


@pytest.fixture(autouse=True, scope="session")
def quiet_diagnostics():
    """Keep the JSON diagnostic stream out of test output."""
    configure_logging(logging.WARNING)


# ============================================================================
# IN-MEMORY GRAPHS
# ============================================================================


def make_graph(
    n_entities: int,
    triples: Iterable[Sequence[int]] = (),
    n_relations: int = 2,
    attr_triples: Sequence[tuple[int, int, str]] = (),
    images: Sequence[tuple[int, int]] = (),
    attr_name_count: int = 0,
) -> Mmkg:
    """Mmkg from (h, r, t) or (h, r, t, time) tuples."""
    rows = [tuple(t) if len(t) == 4 else (*t, NO_TIME) for t in triples]
    quads = np.asarray(rows, dtype=np.int64).reshape(-1, 4)
    return Mmkg(
        n_entities=n_entities,
        n_relations=n_relations,
        quads=quads,
        attr_triples=list(attr_triples),
        entity_images=list(images),
        attr_name_count=attr_name_count,
    )


def make_pair(
    source: Mmkg,
    target: Mmkg,
    train: Sequence[tuple[int, int]] = (),
    test: Sequence[tuple[int, int]] = (),
    n_timestamps: int = 0,
    image_features: tuple[np.ndarray, np.ndarray] | None = None,
    attr_name_features: tuple[np.ndarray, np.ndarray] | None = None,
) -> KgPair:
    def tables(feats, owners):
        if feats is None:
            return None
        return tuple(
            FeatureTable(matrix=np.asarray(m, dtype=np.float64), owner=o) for m, o in zip(feats, owners, strict=True)
        )

    img_owners = None
    if image_features is not None:
        img_owners = [_owners(g, len(np.asarray(m))) for g, m in zip((source, target), image_features, strict=True)]
    name_owners = [list(range(len(np.asarray(m)))) for m in attr_name_features] if attr_name_features else None

    unavailable: dict[ModalityKind, str] = {}
    if image_features is None:
        unavailable[ModalityKind.VISUAL] = "img_feat_1.fmat"
    if attr_name_features is None:
        unavailable[ModalityKind.ATTRIBUTE] = "attrname_feat_1.fmat"
    if n_timestamps == 0 or len(source.timed_quads) == 0 or len(target.timed_quads) == 0:
        unavailable[ModalityKind.TEMPORAL] = "time_ids"
    return KgPair(
        source=source,
        target=target,
        n_timestamps=n_timestamps,
        train_seeds=AlignmentSet(pairs=list(train)),
        test_seeds=AlignmentSet(pairs=list(test)),
        image_features=tables(image_features, img_owners),
        attr_name_features=tables(attr_name_features, name_owners),
        unavailable=unavailable,
    )


def _owners(graph: Mmkg, n_rows: int) -> list[int]:
    owner = [0] * n_rows
    for ent, row in graph.entity_images:
        owner[row] = ent
    return owner


# ============================================================================
# DATASET DIRECTORIES
# ============================================================================


def write_dataset(root: Path, files: dict[str, str]) -> Path:
    """Write text files (name -> content) into ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    for name, content in files.items():
        (root / name).write_text(content, encoding="utf-8")
    return root


def minimal_files(n_source: int = 2, n_target: int = 2) -> dict[str, str]:
    """Mandatory files only: two small graphs, one relation, seed (0, 1)."""
    return {
        "ent_ids_1": "".join(f"{i}\ts{i}\n" for i in range(n_source)),
        "ent_ids_2": "".join(f"{i}\tt{i}\n" for i in range(n_target)),
        "rel_ids_1": "0\tr\n",
        "rel_ids_2": "0\tr\n",
        "triples_1": "0\t0\t1\n",
        "triples_2": "1\t0\t0\n",
        "seeds_train": "0\t1\n",
    }


@pytest.fixture
def minimal_dataset(tmp_path) -> Path:
    return write_dataset(tmp_path / "minimal", minimal_files())


@pytest.fixture
def small_synth_dir(tmp_path) -> Path:
    out = tmp_path / "small"
    generate(SynthSpec(**SMALL_SYNTH), out)
    return out


@pytest.fixture(scope="session")
def noise_free_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("noise_free")
    generate(SynthSpec(**NOISE_FREE_SYNTH), out)
    return out


@pytest.fixture(scope="session")
def noisy_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("noisy")
    generate(SynthSpec(**NOISY_SYNTH), out)
    return out


@pytest.fixture
def config() -> PipelineConfig:
    return PipelineConfig()


# ============================================================================
# ASSERTION HELPERS
# ============================================================================


def assert_one_to_one(pairs: AlignmentSet):
    """Assert no source and no target repeats."""
    sources = [s for s, _ in pairs.pairs]
    targets = [t for _, t in pairs.pairs]
    assert len(set(sources)) == len(sources), "source entity repeated"
    assert len(set(targets)) == len(targets), "target entity repeated"


def assert_valid_report(report: EvalReport):
    """Assert the metric relations every report satisfies."""
    ns = sorted(report.hits)
    values = [report.hits[n] for n in ns]
    assert values == sorted(values), "Hits@N must be non-decreasing in N"
    assert all(0.0 <= v <= 1.0 for v in values)
    if 1 in report.hits:
        assert report.hits[1] <= report.mrr + 1e-12
    assert 0.0 < report.mrr <= 1.0
    assert report.mr >= 1.0


def assert_within_seconds(elapsed: float, budget: float):
    """Assert a timed block stayed within its budget."""
    assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget:.0f}s"


def brute_force_ranks(scores: np.ndarray, gold: Sequence[tuple[int, int]]) -> list[int]:
    """Stable descending sort per row; ties keep column order."""
    ranks = []
    for i, j in gold:
        order = sorted(range(scores.shape[1]), key=lambda c: (-scores[i, c], c))
        ranks.append(order.index(j) + 1)
    return ranks
