"""
Stage orchestration: load -> side modalities -> (bootstrap) -> refine -> predict -> evaluate.

The CLI is a thin layer over these functions; they raise, never exit.
"""

import json
import time
from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .core.config import ModalityKind, PipelineConfig
from .core.errors import AlignmentError, ModalityUnavailableError
from .core.logging import get_logger
from .evalrank import EvalReport, evaluate
from .kgio import AlignmentSet, KgPair, load_kg_pair, write_fmat, write_predictions
from .matrix import DenseMatrix
from .msp import SIDE_MODALITIES, build_all, build_relational
from .refine import RefineState, RoundRecord, accept_candidates, bootstrap_unsupervised, refine_loop

logger = get_logger("mmkg-align.pipeline")


class RunManifest(BaseModel):
    """Everything needed to reproduce a run with the same package version."""

    version: str = __version__
    dataset: str
    config: dict[str, Any]
    modalities: list[str] = Field(description="Modalities that contributed to the fused matrix")
    unavailable: dict[str, str] = Field(default_factory=dict, description="Skipped modality -> missing input")
    stage_seconds: dict[str, float] = Field(default_factory=dict)
    rounds: list[RoundRecord] = Field(default_factory=list)
    initial_anchors: int = 0
    outputs: dict[str, str] = Field(default_factory=dict)


class AlignmentResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scores: Any  # final forward fused matrix
    predictions: AlignmentSet
    report: EvalReport | None = None
    modality_reports: dict[str, EvalReport] | None = None
    state: RefineState
    manifest: RunManifest


@contextmanager
def stage(timings: dict[str, float], name: str) -> Iterator[None]:
    """Record wall-clock seconds of a pipeline stage."""
    started = time.perf_counter()
    try:
        yield
    finally:
        elapsed = round(time.perf_counter() - started, 4)
        timings[name] = elapsed
        logger.info("stage.timing", stage=name, elapsed_s=elapsed)


def build_side_matrices(pair: KgPair, config: PipelineConfig) -> dict[ModalityKind, DenseMatrix]:
    """Visual, attribute and temporal matrices; built once since they do not depend on anchors."""
    side = {kind for kind in SIDE_MODALITIES if config.enabled(kind)}
    if not side:
        return {}
    try:
        return build_all(pair, None, AlignmentSet(), config, kinds=side)
    except ModalityUnavailableError:
        if config.enabled(ModalityKind.RELATIONAL):
            return {}
        raise


def initial_anchors(
    pair: KgPair, side: Mapping[ModalityKind, DenseMatrix], config: PipelineConfig
) -> AlignmentSet:
    """Train seeds, extended with side-modality bootstrap pairs in unsupervised mode."""
    if not config.unsupervised:
        if config.enabled(ModalityKind.RELATIONAL) and len(pair.train_seeds) == 0:
            raise ModalityUnavailableError("seeds_train is empty; rerun with --unsupervised to bootstrap anchors")
        return pair.train_seeds
    boot = bootstrap_unsupervised(pair, side, config)
    return pair.train_seeds.union(accept_candidates(pair.train_seeds, boot))


def align_pair(
    pair: KgPair,
    side: Mapping[ModalityKind, DenseMatrix],
    config: PipelineConfig,
    timings: dict[str, float] | None = None,
) -> tuple[DenseMatrix, AlignmentSet, RefineState, AlignmentSet]:
    """Anchors, refinement and predictions for an already loaded pair."""
    timings = {} if timings is None else timings
    with stage(timings, "anchors"):
        anchors = initial_anchors(pair, side, config)
    with stage(timings, "refine"):
        forward, predictions, state = refine_loop(pair, side, config, initial_anchors=anchors)
    return forward, predictions, state, anchors


def evaluate_modalities(
    pair: KgPair, matrices: Mapping[ModalityKind, DenseMatrix], config: PipelineConfig
) -> dict[ModalityKind, EvalReport]:
    """Zero-shot score of each modality matrix on its own against the test pairs."""
    if len(pair.test_seeds) == 0:
        raise AlignmentError("per-modality evaluation needs seeds_test")
    return {
        kind: evaluate(matrices[kind], pair.test_seeds, config.hits_at, config.both_directions)
        for kind in ModalityKind
        if kind in matrices
    }


def _used_modalities(side: Mapping[ModalityKind, DenseMatrix], config: PipelineConfig) -> list[ModalityKind]:
    kinds = set(side)
    if config.enabled(ModalityKind.RELATIONAL):
        kinds.add(ModalityKind.RELATIONAL)
    return [kind for kind in ModalityKind if kind in kinds]


def run_alignment(dataset_dir: str | Path, config: PipelineConfig, per_modality: bool = False) -> AlignmentResult:
    """Full alignment run over a dataset directory."""
    timings: dict[str, float] = {}
    with stage(timings, "load"):
        pair = load_kg_pair(dataset_dir, config)
    with stage(timings, "side_modalities"):
        side = build_side_matrices(pair, config)

    forward, predictions, state, anchors = align_pair(pair, side, config, timings)

    report = None
    modality_reports = None
    with stage(timings, "evaluate"):
        if len(pair.test_seeds):
            report = evaluate(forward, pair.test_seeds, config.hits_at, config.both_directions)
        if per_modality:
            matrices = dict(side)
            if config.enabled(ModalityKind.RELATIONAL):
                matrices[ModalityKind.RELATIONAL] = build_relational(pair, anchors, config)
            modality_reports = {k.value: r for k, r in evaluate_modalities(pair, matrices, config).items()}

    manifest = RunManifest(
        dataset=str(dataset_dir),
        config=config.model_dump(mode="json"),
        modalities=[k.value for k in _used_modalities(side, config)],
        unavailable={k.value: v for k, v in pair.unavailable.items() if config.enabled(k)},
        stage_seconds=timings,
        rounds=state.history,
        initial_anchors=len(anchors),
    )
    return AlignmentResult(
        scores=forward,
        predictions=predictions,
        report=report,
        modality_reports=modality_reports,
        state=state,
        manifest=manifest,
    )


def dumps_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(data: Any, path: Path) -> None:
    path.write_text(dumps_json(data), encoding="utf-8")


def write_outputs(result: AlignmentResult, out_dir: str | Path, save_scores: bool = False) -> dict[str, str]:
    """predictions.tsv, metrics.json (with test pairs), optional extras, then manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"predictions": str(out / "predictions.tsv")}
    write_predictions(result.predictions, out / "predictions.tsv")
    if result.report is not None:
        write_json(result.report.to_json_dict(), out / "metrics.json")
        outputs["metrics"] = str(out / "metrics.json")
    if result.modality_reports is not None:
        write_json({k: r.to_json_dict() for k, r in result.modality_reports.items()}, out / "modality_metrics.json")
        outputs["modality_metrics"] = str(out / "modality_metrics.json")
    if save_scores:
        write_fmat(result.scores, out / "scores.fmat")
        outputs["scores"] = str(out / "scores.fmat")
    outputs["manifest"] = str(out / "manifest.json")
    result.manifest.outputs = outputs
    write_json(result.manifest.model_dump(mode="json"), out / "manifest.json")
    return outputs


# ============================================================================
# ABLATION
# ============================================================================


def ablation_variants(
    config: PipelineConfig, used: list[ModalityKind]
) -> dict[str, PipelineConfig]:
    """Full config, the no-iteration variant and one variant per removable modality."""
    variants = {
        "full": config,
        "w/o iteration": config.merged(refine_rounds=1, accept_pseudo=False),
    }
    if len(used) > 1:
        for kind in used:
            variants[f"w/o {kind.value}"] = config.merged(modalities={k for k in used if k != kind})
    return variants


def run_ablation(dataset_dir: str | Path, config: PipelineConfig) -> dict[str, EvalReport]:
    """Hits/MRR/MR of every ablation variant on the test pairs; variants that cannot run are skipped."""
    pair = load_kg_pair(dataset_dir, config)
    if len(pair.test_seeds) == 0:
        raise AlignmentError("ablation needs seeds_test")
    side = build_side_matrices(pair, config)
    used = _used_modalities(side, config)

    reports: dict[str, EvalReport] = {}
    for name, variant in ablation_variants(config, used).items():
        variant_side = {k: m for k, m in side.items() if variant.enabled(k)}
        try:
            forward, _, _, _ = align_pair(pair, variant_side, variant)
        except ModalityUnavailableError as e:
            logger.warning("ablation.skipped", variant=name, reason=str(e))
            continue
        reports[name] = evaluate(forward, pair.test_seeds, variant.hits_at, variant.both_directions)
        logger.info("ablation.variant", variant=name, hits_at_1=reports[name].hits.get(1), mrr=reports[name].mrr)
    return reports
