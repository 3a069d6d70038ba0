"""
mmkg-align command line.

Subcommands: ``align``, ``eval``, ``gen-synth`` and ``ablate``. Exit codes: 0 success,
1 user or data error, 2 internal invariant violation.
"""

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .core.config import ModalityKind, PipelineConfig
from .core.errors import AlignmentError, ConfigError, InvariantViolation
from .core.logging import configure_logging, get_logger
from .encoders import available_encoders
from .evalrank import EvalReport, evaluate, evaluate_predictions
from .kgio import read_alignment, read_fmat
from .pipeline import dumps_json, run_ablation, run_alignment, write_json, write_outputs
from .synth import SynthSpec, generate

logger = get_logger("mmkg-align.cli")

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INVARIANT = 2


def _hits(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--hits expects a comma list of integers, got '{text}'") from None


def _modalities(text: str) -> set[ModalityKind]:
    try:
        return ModalityKind.parse_list(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _add_logging_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--debug", action="store_true", help="Enable debug diagnostics")
    parser.add_argument("--quiet", action="store_true", help="Only warnings and errors on stderr")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="Dataset directory")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--config", help="YAML configuration file (flags override it)")
    parser.add_argument("--modalities", type=_modalities, help="Comma list of rel|vis|attr|time (default: all)")
    parser.add_argument("--sinkhorn-k", dest="sinkhorn_k", type=int, help="Sinkhorn iterations (default 10)")
    parser.add_argument("--refine-rounds", dest="refine_rounds", type=int, help="Refinement rounds (default 3)")
    parser.add_argument("--hops", dest="hops_L", type=int, help="Propagation hops (default 2)")
    parser.add_argument("--dim", dest="embed_dim_d", type=int, help="Anchor vector dimension (default 64)")
    parser.add_argument("--max-images", dest="max_images", type=int, help="Images kept per entity (default 6)")
    parser.add_argument("--visual-operator", dest="visual_operator", choices=["max", "sum"],
                        help="Aggregate image pairs by best pair or sum (default max)")
    parser.add_argument("--no-prescale", dest="prescale", action="store_const", const=False,
                        help="Sum raw modality matrices without min-max scaling")
    parser.add_argument("--no-cosine", dest="cosine", action="store_const", const=False,
                        help="Use raw dot products of feature rows")
    parser.add_argument("--accept-pseudo", dest="accept_pseudo", action=argparse.BooleanOptionalAction,
                        default=None, help="Add mutual-argmax pseudo-seeds to the anchors (default on)")
    parser.add_argument("--pseudo-on-test", dest="holdout_test_entities", action="store_const", const=False,
                        help="Allow pseudo-seeds on test entities (transductive refinement)")
    parser.add_argument("--unsupervised", action="store_const", const=True,
                        help="Bootstrap anchors from side modalities")
    parser.add_argument("--encoder", choices=available_encoders(), help="Relational encoder (default propagation)")
    parser.add_argument("--workers", type=int, help="Threads for modality builders (default 1)")
    parser.add_argument("--seed", dest="global_seed", type=int, help="Global RNG seed (default 0)")
    parser.add_argument("--hits", dest="hits_at", type=_hits, help='Hits@N values (default "1,5,10")')
    parser.add_argument("--both-directions", dest="both_directions", action="store_const", const=True,
                        help="Average source->target and target->source metrics")
    _add_logging_flags(parser)


_CONFIG_FLAGS = (
    "modalities", "sinkhorn_k", "refine_rounds", "hops_L", "embed_dim_d", "max_images", "visual_operator",
    "prescale", "cosine", "accept_pseudo", "holdout_test_entities", "unsupervised", "encoder", "workers",
    "global_seed", "hits_at", "both_directions",
)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """YAML file, then ``MMKG_ALIGN_*`` environment, then explicit flags."""
    base = PipelineConfig.from_yaml_file(args.config) if args.config else PipelineConfig()
    config = PipelineConfig.from_env(base)
    return config.merged(**{name: getattr(args, name) for name in _CONFIG_FLAGS})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmkg-align", description="Multi-modal knowledge graph entity alignment")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    align = sub.add_parser("align", help="Align a dataset and write predictions, metrics and a manifest")
    _add_pipeline_flags(align)
    align.add_argument("--per-modality", action="store_true", help="Also score every modality on its own")
    align.add_argument("--save-scores", action="store_true", help="Write the final fused matrix as scores.fmat")

    ablate = sub.add_parser("ablate", help="Score the full pipeline against its ablated variants")
    _add_pipeline_flags(ablate)

    ev = sub.add_parser("eval", help="Score predictions or a score matrix against gold pairs")
    ev.add_argument("--gold", required=True, help="Gold alignment TSV")
    source = ev.add_mutually_exclusive_group(required=True)
    source.add_argument("--predictions", help="Prediction TSV (src, tgt[, score])")
    source.add_argument("--scores", help="FMAT score matrix (source x target)")
    ev.add_argument("--candidates", type=int,
                    help="Target candidate count for --predictions (default: largest target id seen + 1)")
    ev.add_argument("--hits", dest="hits_at", type=_hits, default=[1, 5, 10], help='Hits@N values (default "1,5,10")')
    ev.add_argument("--both-directions", action="store_true", help="Average both directions (--scores only)")
    _add_logging_flags(ev)

    gen = sub.add_parser("gen-synth", help="Write a synthetic dataset with known gold alignment")
    gen.add_argument("--out", required=True, help="Dataset directory to write")
    gen.add_argument("--entities", dest="n_entities", type=int)
    gen.add_argument("--relations", dest="n_relations", type=int)
    gen.add_argument("--timestamps", dest="n_timestamps", type=int)
    gen.add_argument("--triple-density", dest="triple_density", type=float)
    gen.add_argument("--perturbation", type=float)
    gen.add_argument("--feat-dim", dest="feat_dim", type=int)
    gen.add_argument("--feat-noise", dest="feat_noise_sigma", type=float)
    gen.add_argument("--attr-per-entity", dest="attr_per_entity", type=int)
    gen.add_argument("--attr-names", dest="n_attr_names", type=int)
    gen.add_argument("--value-noise", dest="value_noise_sigma", type=float)
    gen.add_argument("--images-per-entity", dest="images_per_entity", type=int)
    gen.add_argument("--seed-ratio", dest="seed_ratio", type=float)
    gen.add_argument("--seed", dest="global_seed", type=int)
    _add_logging_flags(gen)
    return parser


# ============================================================================
# COMMANDS
# ============================================================================


def cmd_align(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    result = run_alignment(args.data, config, per_modality=args.per_modality)
    outputs = write_outputs(result, args.out, save_scores=args.save_scores)
    logger.info("align.done", outputs=outputs, hits=result.report.hits if result.report else None)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    reports = run_ablation(args.data, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json({name: r.to_json_dict() for name, r in reports.items()}, out / "ablation.json")
    logger.info("ablate.done", variants=list(reports), path=str(out / "ablation.json"))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    if args.scores:
        scores = read_fmat(args.scores)
        gold = read_alignment(Path(args.gold), scores.shape[0], scores.shape[1])
        report: EvalReport = evaluate(scores, gold, args.hits_at, args.both_directions)
    else:
        gold = read_alignment(Path(args.gold))
        predictions = read_alignment(Path(args.predictions), one_to_one=False)
        n_candidates = args.candidates
        if n_candidates is None:
            n_candidates = 1 + max([t for _, t in gold.pairs] + [t for _, t in predictions.pairs], default=0)
        report = evaluate_predictions(predictions, gold, n_candidates, args.hits_at)
    sys.stdout.write(dumps_json(report.to_json_dict()))
    return EXIT_OK


def cmd_gen_synth(args: argparse.Namespace) -> int:
    fields = {name: getattr(args, name) for name in SynthSpec.model_fields if getattr(args, name, None) is not None}
    spec = SynthSpec(**fields)
    generate(spec, args.out)
    return EXIT_OK


_COMMANDS = {
    "align": cmd_align,
    "ablate": cmd_ablate,
    "eval": cmd_eval,
    "gen-synth": cmd_gen_synth,
}


def main(argv: list[str] | None = None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage; --help and --version exit 0
        return EXIT_USER_ERROR if e.code else EXIT_OK

    level = logging.DEBUG if args.debug else logging.WARNING if args.quiet else logging.INFO
    configure_logging(level)

    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as e:
        logger.error("error", kind=type(e).__name__, message=str(e))
        return EXIT_INVARIANT
    except (AlignmentError, ValidationError, OSError) as e:
        logger.error("error", kind=type(e).__name__, message=str(e))
        return EXIT_USER_ERROR


if __name__ == "__main__":
    sys.exit(main())
