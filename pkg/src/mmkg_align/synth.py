"""
Synthetic MMKG pair generator.

Samples a source graph, then builds the target as an entity-permuted copy with structural noise,
noisy features and noisy numeric attribute values. Output is a dataset directory in the kgio layout
plus ``gold_all``; the same ``SynthSpec`` always produces byte-identical files.
"""

from pathlib import Path

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field

from .core.errors import DatasetError
from .core.logging import get_logger
from .kgio import NO_TIME, AlignmentSet, write_alignment, write_fmat, write_id_map

logger = get_logger("mmkg-align.synth")


class SynthSpec(BaseModel):
    """Parameters of a synthetic dataset."""

    n_entities: int = Field(default=500, ge=1, description="Entities per graph")
    n_relations: int = Field(default=10, ge=1, description="Relation vocabulary size")
    n_timestamps: int = Field(default=20, ge=0, description="Shared timestamp vocabulary size (0 = no time)")
    triple_density: float = Field(default=4.0, ge=0, description="Average triples per entity")
    perturbation: float = Field(default=0.0, ge=0, le=1, description="Fraction of target triples dropped/rewired")
    feat_dim: int = Field(default=32, ge=1, description="Image and attribute-name feature dimension")
    feat_noise_sigma: float = Field(default=0.0, ge=0, description="Gaussian noise on target features")
    attr_per_entity: int = Field(default=3, ge=0, description="Attribute triples per entity")
    n_attr_names: int = Field(default=20, ge=1, description="Attribute name vocabulary size")
    value_noise_sigma: float = Field(default=0.0, ge=0, description="Gaussian noise on target numeric values")
    images_per_entity: int = Field(default=1, ge=0, description="Image rows per entity")
    seed_ratio: float = Field(default=0.2, ge=0, le=1, description="Fraction of gold pairs used as train seeds")
    global_seed: int = Field(default=0, ge=0, description="RNG seed")


def _normalized(rows: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms == 0, 1.0, norms)


def _noisy_unit_rows(rows: npt.NDArray[np.float64], sigma: float, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    """Gaussian noise then re-normalization; sigma 0 copies the rows exactly."""
    if sigma == 0:
        return rows.copy()
    return _normalized(rows + rng.normal(0.0, sigma, size=rows.shape))


def _unit_rows(n: int, dim: int, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    return _normalized(rng.standard_normal((n, dim)))


def _format_value(v: float) -> str:
    return f"{v:.6f}"


def _write_quads(quads: npt.NDArray[np.int64], path: Path) -> None:
    lines = []
    for h, r, t, tau in quads.tolist():
        lines.append(f"{h}\t{r}\t{t}" if tau == NO_TIME else f"{h}\t{r}\t{t}\t{tau}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _write_attrs(attrs: list[tuple[int, int, str]], path: Path) -> None:
    path.write_text("".join(f"{e}\t{k}\t{v}\n" for e, k, v in attrs), encoding="utf-8")


def _write_image_rows(owner: list[int], path: Path) -> None:
    path.write_text("".join(f"{row}\t{ent}\n" for row, ent in enumerate(owner)), encoding="utf-8")


def generate(spec: SynthSpec, out_dir: str | Path) -> AlignmentSet:
    """Write a synthetic dataset to ``out_dir``; returns the gold alignment."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(out, f"cannot create dataset directory: {e}") from e

    rng = np.random.default_rng(spec.global_seed)
    n = spec.n_entities
    perm = rng.permutation(n)  # source entity e -> target entity perm[e]

    # Relational structure
    n_triples = int(round(spec.triple_density * n))
    heads = rng.integers(0, n, size=n_triples)
    rels = rng.integers(0, spec.n_relations, size=n_triples)
    tails = rng.integers(0, n, size=n_triples)
    if spec.n_timestamps > 0:
        taus = rng.integers(0, spec.n_timestamps, size=n_triples)
    else:
        taus = np.full(n_triples, NO_TIME)
    src_quads = np.stack([heads, rels, tails, taus], axis=1).astype(np.int64)

    tgt_quads = src_quads.copy()
    tgt_quads[:, 0] = perm[src_quads[:, 0]]
    tgt_quads[:, 2] = perm[src_quads[:, 2]]
    n_perturbed = int(round(spec.perturbation * n_triples))
    perturbed = rng.choice(n_triples, size=n_perturbed, replace=False) if n_perturbed else np.zeros(0, dtype=int)
    drop = rng.random(n_perturbed) < 0.5
    tgt_quads[perturbed[~drop], 2] = rng.integers(0, n, size=int((~drop).sum()))
    keep = np.ones(n_triples, dtype=bool)
    keep[perturbed[drop]] = False
    tgt_quads = tgt_quads[keep]

    # Attributes: shared name vocabulary, numeric values
    attr_ents = np.repeat(np.arange(n), spec.attr_per_entity)
    attr_names = rng.integers(0, spec.n_attr_names, size=len(attr_ents))
    attr_values = rng.uniform(0.0, 1000.0, size=len(attr_ents))
    tgt_values = attr_values + (rng.normal(0.0, spec.value_noise_sigma, size=len(attr_ents))
                                if spec.value_noise_sigma > 0 else 0.0)
    src_attrs = [(int(e), int(k), _format_value(v)) for e, k, v in zip(attr_ents, attr_names, attr_values, strict=True)]
    tgt_attrs = sorted(
        (int(perm[e]), int(k), _format_value(v)) for e, k, v in zip(attr_ents, attr_names, tgt_values, strict=True)
    )
    name_feats_s = _unit_rows(spec.n_attr_names, spec.feat_dim, rng)
    name_feats_t = _noisy_unit_rows(name_feats_s, spec.feat_noise_sigma, rng)

    # Images: row r of the source table belongs to entity r // images_per_entity
    k_img = spec.images_per_entity
    img_s = _unit_rows(n * k_img, spec.feat_dim, rng)
    owner_s = [e for e in range(n) for _ in range(k_img)]
    inverse = np.argsort(perm)  # target entity j -> source entity
    tgt_order = [int(inverse[j]) * k_img + c for j in range(n) for c in range(k_img)]
    img_t = _noisy_unit_rows(img_s[tgt_order], spec.feat_noise_sigma, rng) if tgt_order else img_s[:0]
    owner_t = [j for j in range(n) for _ in range(k_img)]

    # Seeds
    gold = AlignmentSet(pairs=[(e, int(perm[e])) for e in range(n)])
    order = rng.permutation(n)
    n_train = int(round(spec.seed_ratio * n))
    train = AlignmentSet(pairs=[(int(e), int(perm[e])) for e in order[:n_train]])
    test = AlignmentSet(pairs=[(int(e), int(perm[e])) for e in order[n_train:]])

    write_id_map([f"src_{e}" for e in range(n)], out / "ent_ids_1")
    write_id_map([f"tgt_{j}" for j in range(n)], out / "ent_ids_2")
    for side in (1, 2):
        write_id_map([f"rel_{r}" for r in range(spec.n_relations)], out / f"rel_ids_{side}")
        write_id_map([f"attr_{k}" for k in range(spec.n_attr_names)], out / f"attr_name_ids_{side}")
    if spec.n_timestamps > 0:
        write_id_map([f"t{tau}" for tau in range(spec.n_timestamps)], out / "time_ids")
    _write_quads(src_quads, out / "triples_1")
    _write_quads(tgt_quads, out / "triples_2")
    _write_attrs(src_attrs, out / "attr_triples_1")
    _write_attrs(tgt_attrs, out / "attr_triples_2")
    write_fmat(name_feats_s, out / "attrname_feat_1.fmat")
    write_fmat(name_feats_t, out / "attrname_feat_2.fmat")
    if k_img > 0:
        write_fmat(img_s, out / "img_feat_1.fmat")
        write_fmat(img_t, out / "img_feat_2.fmat")
        _write_image_rows(owner_s, out / "img_rows_1")
        _write_image_rows(owner_t, out / "img_rows_2")
    write_alignment(train, out / "seeds_train")
    write_alignment(test, out / "seeds_test")
    write_alignment(gold, out / "gold_all")

    logger.info(
        "synth.generated",
        path=str(out),
        entities=n,
        source_triples=len(src_quads),
        target_triples=len(tgt_quads),
        train=len(train),
        test=len(test),
    )
    return gold
