"""
mmkg-align Configuration

Pipeline knobs, loadable from YAML, environment variables or CLI flags.
"""

import os
from enum import StrEnum
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from .errors import ConfigError


class ModalityKind(StrEnum):
    """The four modalities a similarity path can be built for."""

    RELATIONAL = "rel"
    VISUAL = "vis"
    ATTRIBUTE = "attr"
    TEMPORAL = "time"

    @classmethod
    def parse_list(cls, text: str) -> set["ModalityKind"]:
        """Parse a comma list such as ``rel,vis,attr``."""
        kinds = set()
        for token in text.split(","):
            token = token.strip().lower()
            if not token:
                continue
            try:
                kinds.add(cls(token))
            except ValueError:
                choices = ", ".join(k.value for k in cls)
                raise ConfigError(f"Unknown modality '{token}' (choose from {choices})") from None
        return kinds


ALL_MODALITIES = frozenset(ModalityKind)

# Environment variable prefix for from_env()
ENV_PREFIX = "MMKG_ALIGN_"


class PipelineConfig(BaseModel):
    """Configuration for one alignment run."""

    model_config = ConfigDict(validate_assignment=True)

    sinkhorn_k: int = Field(default=10, description="Sinkhorn iterations (row then column normalization)")
    refine_rounds: int = Field(default=3, description="Iterative refinement rounds")
    hops_L: int = Field(default=2, description="Propagation hops for relational and temporal paths")
    max_images: int = Field(default=6, description="Maximum image rows kept per entity")
    visual_operator: Literal["max", "sum"] = Field(
        default="max", description="Aggregation over image pairs on the visual path: best pair or sum of all pairs"
    )
    embed_dim_d: int = Field(default=64, description="Anchor vector dimension of the default encoder")
    epsilon_v: float = Field(default=1e-6, description="Clamp for |v_i - v_j| in attribute value similarity")
    global_seed: int = Field(default=0, ge=0, description="Single source of all pseudo-randomness")
    modalities: set[ModalityKind] = Field(
        default_factory=lambda: set(ALL_MODALITIES),
        description="Enabled modalities; unavailable ones are skipped with a warning",
    )
    prescale: bool = Field(default=True, description="Min-max scale each modality matrix before summing")
    cosine: bool = Field(default=True, description="L2-normalize feature rows before dot products")
    accept_pseudo: bool = Field(default=True, description="Add mutual-argmax pseudo-seeds to the anchors")
    holdout_test_entities: bool = Field(
        default=True, description="Never accept pseudo-seeds touching a test source or test target"
    )
    unsupervised: bool = Field(default=False, description="Bootstrap anchors from side modalities")
    encoder: str = Field(default="propagation", description="Relational encoder registry name")
    workers: int = Field(default=1, description="Threads for independent modality builders")
    hits_at: list[int] = Field(default_factory=lambda: [1, 5, 10], description="N values for Hits@N")
    both_directions: bool = Field(default=False, description="Average source->target and target->source metrics")

    @field_validator("sinkhorn_k", "refine_rounds", "hops_L", "max_images", "embed_dim_d", "workers")
    @classmethod
    def _at_least_one(cls, v: int, info) -> int:
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @field_validator("epsilon_v")
    @classmethod
    def _positive_epsilon(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"epsilon_v must be > 0, got {v}")
        return v

    @field_validator("modalities")
    @classmethod
    def _non_empty_modalities(cls, v: set[ModalityKind]) -> set[ModalityKind]:
        if not v:
            raise ValueError("at least one modality must be enabled")
        return v

    @field_validator("hits_at")
    @classmethod
    def _positive_hits(cls, v: list[int]) -> list[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError(f"hits_at must be a non-empty list of positive integers, got {v}")
        return sorted(set(v))

    @field_serializer("modalities")
    def _ordered_modalities(self, v: set[ModalityKind]) -> list[str]:
        return [kind.value for kind in ModalityKind if kind in v]

    @classmethod
    def from_yaml_file(cls, file_path: str | Path) -> "PipelineConfig":
        """Load configuration from YAML file."""
        file_path = Path(file_path)

        if not file_path.exists():
            raise ConfigError(f"Configuration file not found: {file_path}")

        try:
            with open(file_path, encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (UnicodeDecodeError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot parse configuration file {file_path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"Configuration file {file_path} must contain a mapping")

        # Handle nested pipeline config
        if "pipeline" in data:
            data = data["pipeline"]

        if isinstance(data.get("modalities"), str):
            data["modalities"] = ModalityKind.parse_list(data["modalities"])

        return cls(**data)

    @classmethod
    def from_env(cls, base: "PipelineConfig | None" = None) -> "PipelineConfig":
        """Overlay ``MMKG_ALIGN_*`` environment variables on ``base`` (or defaults)."""
        data: dict[str, Any] = (base or cls()).model_dump()
        for name in cls.model_fields:
            raw = os.getenv(ENV_PREFIX + name.upper())
            if raw is None:
                continue
            if name == "modalities":
                data[name] = ModalityKind.parse_list(raw)
            elif name == "hits_at":
                data[name] = [int(x) for x in raw.split(",") if x.strip()]
            else:
                data[name] = raw
        return cls(**data)

    def merged(self, **overrides: Any) -> "PipelineConfig":
        """Copy with non-None overrides applied (and validated)."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return type(self)(**data)

    def enabled(self, kind: ModalityKind) -> bool:
        return kind in self.modalities
