"""
Knowledge-graph data model and on-disk formats.

A dataset directory holds two graphs as tab-separated id files, optional side-modality files,
FMAT feature tables and the train/test seed alignment. Everything is validated on load and the
resulting objects are treated as immutable.
"""

import struct
from collections.abc import Iterator, Sequence
from pathlib import Path

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from .core.config import ModalityKind, PipelineConfig
from .core.errors import DatasetError, FormatError
from .core.logging import get_logger
from .matrix import DenseMatrix

logger = get_logger("mmkg-align.kgio")

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1
_FMAT_HEADER = struct.Struct("<4sIQQ")

# Timestamp column value for plain triples
NO_TIME = -1


# ============================================================================
# DATA MODEL
# ============================================================================


class AlignmentSet(BaseModel):
    """Entity pairs (seeds, pseudo-seeds or predictions), optionally scored."""

    model_config = ConfigDict(frozen=True)

    pairs: list[tuple[int, int]] = Field(default_factory=list)
    scores: list[float] | None = None

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[tuple[int, int]]:  # type: ignore[override]
        return iter(self.pairs)

    @property
    def sources(self) -> set[int]:
        return {s for s, _ in self.pairs}

    @property
    def targets(self) -> set[int]:
        return {t for _, t in self.pairs}

    def is_one_to_one(self) -> bool:
        return len(self.sources) == len(self.pairs) == len(self.targets)

    def as_arrays(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
        if not self.pairs:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy()
        arr = np.asarray(self.pairs, dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def sorted(self) -> "AlignmentSet":
        """Copy ordered by (src, tgt)."""
        order = sorted(range(len(self.pairs)), key=lambda k: self.pairs[k])
        scores = [self.scores[k] for k in order] if self.scores is not None else None
        return AlignmentSet(pairs=[self.pairs[k] for k in order], scores=scores)

    def swapped(self) -> "AlignmentSet":
        """Pairs with the source and target roles exchanged."""
        return AlignmentSet(pairs=[(t, s) for s, t in self.pairs], scores=self.scores)

    def union(self, other: "AlignmentSet") -> "AlignmentSet":
        """Pairs of ``self`` followed by pairs of ``other`` not already present."""
        seen = set(self.pairs)
        extra = [p for p in other.pairs if p not in seen]
        return AlignmentSet(pairs=[*self.pairs, *extra])


class Mmkg(BaseModel):
    """One multi-modal knowledge graph with dense integer ids."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_entities: int
    n_relations: int
    # (head, rel, tail, time) rows; time == NO_TIME for plain triples
    quads: np.ndarray
    attr_triples: list[tuple[int, int, str]] = Field(default_factory=list)
    entity_images: list[tuple[int, int]] = Field(default_factory=list)
    attr_name_count: int = 0
    entity_labels: list[str] | None = None

    @property
    def timed_quads(self) -> npt.NDArray[np.int64]:
        return self.quads[self.quads[:, 3] != NO_TIME]


class FeatureTable(BaseModel):
    """Feature rows plus the owner id of every row."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray
    owner: list[int]

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


class KgPair(BaseModel):
    """Source and target graphs, shared timestamp vocabulary, seeds and side-modality inputs."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    source: Mmkg
    target: Mmkg
    n_timestamps: int = 0
    train_seeds: AlignmentSet = Field(default_factory=AlignmentSet)
    test_seeds: AlignmentSet = Field(default_factory=AlignmentSet)
    image_features: tuple[FeatureTable, FeatureTable] | None = None
    attr_name_features: tuple[FeatureTable, FeatureTable] | None = None
    # modality -> file whose absence disabled it
    unavailable: dict[ModalityKind, str] = Field(default_factory=dict)

    def available(self, kind: ModalityKind) -> bool:
        return kind not in self.unavailable


# ============================================================================
# TSV READERS
# ============================================================================


def _rows(path: Path, min_fields: int, max_fields: int | None = None) -> Iterator[tuple[int, list[str]]]:
    """Yield (line number, fields) for every non-empty line."""
    max_fields = max_fields or min_fields
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DatasetError(path, "missing mandatory file") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        lineno = raw.count(b"\n", 0, e.start) + 1
        raise DatasetError(path, f"invalid UTF-8 at byte {e.start}", lineno) from None
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r").split("\t", max_fields - 1)
        if len(fields) < min_fields:
            raise DatasetError(path, f"expected at least {min_fields} tab-separated fields", lineno)
        yield lineno, fields


def _index(path: Path, lineno: int, text: str, bound: int | None, what: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DatasetError(path, f"{what} '{text}' is not an integer", lineno) from None
    if value < 0 or (bound is not None and value >= bound):
        limit = f" (< {bound})" if bound is not None else ""
        raise DatasetError(path, f"{what} index {value} out of range{limit}", lineno)
    return value


def read_id_map(path: Path) -> list[str]:
    """Read ``<int>\\t<label>`` lines; the vocabulary size is max id + 1."""
    labels: dict[int, str] = {}
    for lineno, fields in _rows(path, 1, 2):
        idx = _index(path, lineno, fields[0], None, "id")
        if idx in labels:
            raise DatasetError(path, f"duplicate id {idx}", lineno)
        labels[idx] = fields[1] if len(fields) > 1 else ""
    size = max(labels) + 1 if labels else 0
    return [labels.get(i, "") for i in range(size)]


def read_quads(path: Path, n_entities: int, n_relations: int, n_timestamps: int) -> npt.NDArray[np.int64]:
    rows = []
    for lineno, fields in _rows(path, 3, 4):
        h = _index(path, lineno, fields[0], n_entities, "head")
        r = _index(path, lineno, fields[1], n_relations, "relation")
        t = _index(path, lineno, fields[2], n_entities, "tail")
        tau = NO_TIME
        if len(fields) == 4 and fields[3].strip():
            tau = _index(path, lineno, fields[3].strip(), n_timestamps, "timestamp")
        rows.append((h, r, t, tau))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 4)


def read_attr_triples(path: Path, n_entities: int, n_names: int) -> list[tuple[int, int, str]]:
    triples = []
    for lineno, fields in _rows(path, 3):
        e = _index(path, lineno, fields[0], n_entities, "entity")
        k = _index(path, lineno, fields[1], n_names, "attribute name")
        triples.append((e, k, fields[2]))
    return triples


def read_alignment(
    path: Path,
    n_source: int | None = None,
    n_target: int | None = None,
    one_to_one: bool = True,
) -> AlignmentSet:
    """Read ``src\\ttgt[\\tscore]`` lines."""
    pairs: list[tuple[int, int]] = []
    scores: list[float] = []
    seen_src: set[int] = set()
    seen_tgt: set[int] = set()
    for lineno, fields in _rows(path, 2, 3):
        s = _index(path, lineno, fields[0], n_source, "source entity")
        t = _index(path, lineno, fields[1], n_target, "target entity")
        if one_to_one:
            if s in seen_src:
                raise DatasetError(path, f"duplicate source entity {s}", lineno)
            if t in seen_tgt:
                raise DatasetError(path, f"duplicate target entity {t}", lineno)
        seen_src.add(s)
        seen_tgt.add(t)
        pairs.append((s, t))
        if len(fields) == 3:
            try:
                scores.append(float(fields[2]))
            except ValueError:
                raise DatasetError(path, f"score '{fields[2]}' is not a number", lineno) from None
    has_scores = bool(pairs) and len(scores) == len(pairs)
    return AlignmentSet(pairs=pairs, scores=scores if has_scores else None)


def write_alignment(pairs: AlignmentSet, path: Path, with_scores: bool = False) -> None:
    lines = []
    ordered = pairs.sorted()
    for k, (s, t) in enumerate(ordered.pairs):
        if with_scores:
            score = ordered.scores[k] if ordered.scores is not None else 0.0
            lines.append(f"{s}\t{t}\t{score:.6f}")
        else:
            lines.append(f"{s}\t{t}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def write_predictions(pairs: AlignmentSet, path: str | Path) -> None:
    """Write ``src\\ttgt\\tscore`` lines sorted by source index."""
    write_alignment(pairs, Path(path), with_scores=True)


def write_id_map(labels: Sequence[str], path: Path) -> None:
    path.write_text("".join(f"{i}\t{label}\n" for i, label in enumerate(labels)), encoding="utf-8")


# ============================================================================
# FMAT FEATURE TABLES
# ============================================================================


def read_fmat(path: str | Path) -> DenseMatrix:
    """Read an FMAT file into a float64 matrix."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FormatError(path, "missing feature file") from None
    if len(raw) < _FMAT_HEADER.size:
        raise FormatError(path, "truncated header")
    magic, version, rows, cols = _FMAT_HEADER.unpack_from(raw)
    if magic != FMAT_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}")
    if version != FMAT_VERSION:
        raise FormatError(path, f"unsupported version {version}")
    expected = rows * cols * 4
    payload = raw[_FMAT_HEADER.size :]
    if len(payload) < expected:
        raise FormatError(path, f"truncated payload: {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise FormatError(path, f"trailing bytes: {len(payload) - expected}")
    values = np.frombuffer(payload, dtype="<f4", count=rows * cols).reshape(rows, cols)
    if not np.isfinite(values).all():
        raise FormatError(path, "non-finite value in payload")
    return values.astype(np.float64)


def write_fmat(matrix: npt.ArrayLike, path: str | Path) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"FMAT holds 2-D matrices, got shape {arr.shape}")
    rows, cols = arr.shape
    Path(path).write_bytes(_FMAT_HEADER.pack(FMAT_MAGIC, FMAT_VERSION, rows, cols) + arr.tobytes())


def load_feature_table(path: str | Path, owner_path: str | Path | None = None) -> FeatureTable:
    """Load an FMAT table; ``owner_path`` lines are ``<row>\\t<owner>`` (identity owners if omitted)."""
    matrix = read_fmat(path)
    rows = matrix.shape[0]
    if owner_path is None:
        return FeatureTable(matrix=matrix, owner=list(range(rows)))

    owner_path = Path(owner_path)
    owner = [-1] * rows
    count = 0
    for lineno, fields in _rows(owner_path, 2):
        row = _index(owner_path, lineno, fields[0], None, "row")
        if row >= rows:
            raise DatasetError(owner_path, f"row {row} beyond the {rows} rows of {Path(path).name}", lineno)
        if owner[row] != -1:
            raise DatasetError(owner_path, f"row {row} referenced more than once", lineno)
        owner[row] = _index(owner_path, lineno, fields[1], None, "owner")
        count += 1
    if count != rows:
        raise DatasetError(owner_path, f"owner file has {count} rows, feature table has {rows}")
    return FeatureTable(matrix=matrix, owner=owner)


def read_image_rows(path: Path, n_entities: int, n_rows: int, max_images: int) -> list[tuple[int, int]]:
    """Entity-image links in file order, keeping the first ``max_images`` rows per entity."""
    kept: list[tuple[int, int]] = []
    per_entity: dict[int, int] = {}
    seen_rows: set[int] = set()
    dropped = 0
    for lineno, fields in _rows(path, 2):
        row = _index(path, lineno, fields[0], n_rows, "image row")
        ent = _index(path, lineno, fields[1], n_entities, "entity")
        if row in seen_rows:
            raise DatasetError(path, f"image row {row} referenced more than once", lineno)
        seen_rows.add(row)
        if per_entity.get(ent, 0) >= max_images:
            dropped += 1
            continue
        per_entity[ent] = per_entity.get(ent, 0) + 1
        kept.append((ent, row))
    if dropped:
        logger.info("images.capped", file=str(path), dropped=dropped, max_images=max_images)
    return kept


# ============================================================================
# DATASET DIRECTORY
# ============================================================================


def _load_graph(root: Path, side: int, n_timestamps: int, config: PipelineConfig) -> tuple[Mmkg, list[str]]:
    """Load graph ``side`` (1 or 2); returns the graph and the names of missing optional files."""
    missing: list[str] = []
    ent_labels = read_id_map(root / f"ent_ids_{side}")
    rel_labels = read_id_map(root / f"rel_ids_{side}")
    n_ent, n_rel = len(ent_labels), len(rel_labels)
    quads = read_quads(root / f"triples_{side}", n_ent, n_rel, n_timestamps)

    attr_triples: list[tuple[int, int, str]] = []
    name_count = 0
    name_path = root / f"attr_name_ids_{side}"
    attr_path = root / f"attr_triples_{side}"
    if name_path.exists() and attr_path.exists():
        name_count = len(read_id_map(name_path))
        attr_triples = read_attr_triples(attr_path, n_ent, name_count)
    else:
        missing.extend(p.name for p in (name_path, attr_path) if not p.exists())

    images: list[tuple[int, int]] = []
    img_rows = root / f"img_rows_{side}"
    img_feat = root / f"img_feat_{side}.fmat"
    if img_rows.exists() and img_feat.exists():
        n_rows = _fmat_rows(img_feat)
        images = read_image_rows(img_rows, n_ent, n_rows, config.max_images)

    graph = Mmkg(
        n_entities=n_ent,
        n_relations=n_rel,
        quads=quads,
        attr_triples=attr_triples,
        entity_images=images,
        attr_name_count=name_count,
        entity_labels=ent_labels,
    )
    return graph, missing


def _fmat_rows(path: Path) -> int:
    with open(path, "rb") as f:
        head = f.read(_FMAT_HEADER.size)
    if len(head) < _FMAT_HEADER.size:
        raise FormatError(path, "truncated header")
    return int(_FMAT_HEADER.unpack(head)[2])


def _load_pair_tables(root: Path, stem: str, owners: str | None) -> tuple[FeatureTable, FeatureTable] | None:
    paths = [root / f"{stem}_{side}.fmat" for side in (1, 2)]
    if not all(p.exists() for p in paths):
        return None
    if owners is None:
        return load_feature_table(paths[0]), load_feature_table(paths[1])
    owner_paths = [root / f"{owners}_{side}" for side in (1, 2)]
    if not all(p.exists() for p in owner_paths):
        return None
    return load_feature_table(paths[0], owner_paths[0]), load_feature_table(paths[1], owner_paths[1])


def load_kg_pair(dataset_dir: str | Path, config: PipelineConfig | None = None) -> KgPair:
    """Load and validate a dataset directory."""
    config = config or PipelineConfig()
    root = Path(dataset_dir)
    if not root.is_dir():
        raise DatasetError(root, "dataset directory not found")

    time_path = root / "time_ids"
    n_timestamps = len(read_id_map(time_path)) if time_path.exists() else 0

    source, missing_s = _load_graph(root, 1, n_timestamps, config)
    target, missing_t = _load_graph(root, 2, n_timestamps, config)

    train = read_alignment(root / "seeds_train", source.n_entities, target.n_entities)
    test_path = root / "seeds_test"
    test = (
        read_alignment(test_path, source.n_entities, target.n_entities)
        if test_path.exists()
        else AlignmentSet()
    )
    _check_disjoint(train, test, test_path)

    image_features = _load_pair_tables(root, "img_feat", "img_rows")
    if image_features is not None:
        for side, (graph, table) in enumerate(zip((source, target), image_features, strict=True), start=1):
            for row, ent in enumerate(table.owner):
                if ent >= graph.n_entities:
                    raise DatasetError(root / f"img_rows_{side}", f"row {row} owned by unknown entity {ent}")
    attr_name_features = _load_pair_tables(root, "attrname_feat", None)

    unavailable: dict[ModalityKind, str] = {}
    if image_features is None:
        unavailable[ModalityKind.VISUAL] = _first_missing(
            root, ["img_rows_1", "img_rows_2", "img_feat_1.fmat", "img_feat_2.fmat"]
        )
    if missing_s or missing_t or attr_name_features is None:
        unavailable[ModalityKind.ATTRIBUTE] = _first_missing(
            root,
            [*missing_s, *missing_t, "attrname_feat_1.fmat", "attrname_feat_2.fmat"],
        )
    if n_timestamps == 0:
        unavailable[ModalityKind.TEMPORAL] = "time_ids"
    elif len(source.timed_quads) == 0 or len(target.timed_quads) == 0:
        unavailable[ModalityKind.TEMPORAL] = "triples_1/triples_2 (no timestamped quadruples)"

    pair = KgPair(
        source=source,
        target=target,
        n_timestamps=n_timestamps,
        train_seeds=train,
        test_seeds=test,
        image_features=image_features,
        attr_name_features=attr_name_features,
        unavailable=unavailable,
    )
    logger.info(
        "dataset.loaded",
        path=str(root),
        source_entities=source.n_entities,
        target_entities=target.n_entities,
        train=len(train),
        test=len(test),
        unavailable=sorted(k.value for k in unavailable),
    )
    return pair


def _first_missing(root: Path, names: list[str]) -> str:
    for name in names:
        if not (root / name).exists():
            return name
    return names[0]


def _check_disjoint(train: AlignmentSet, test: AlignmentSet, test_path: Path) -> None:
    src = train.sources & test.sources
    if src:
        raise DatasetError(test_path, f"source entity {min(src)} appears in both train and test seeds")
    tgt = train.targets & test.targets
    if tgt:
        raise DatasetError(test_path, f"target entity {min(tgt)} appears in both train and test seeds")
