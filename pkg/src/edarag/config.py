"""Pipeline configuration: one JSON file, overridable by CLI flags.

The fingerprint of the effective configuration is embedded in emitted reports
so any artifact can be traced back to the exact settings that produced it.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .augment import AugmentConfig
from .corpus import ChunkingConfig
from .errors import MalformedRecord
from .gateway import GatewayConfig
from .retrieval import DEFAULT_B, DEFAULT_K1, DEFAULT_POOL_SIZE, DEFAULT_RRF_K


@dataclass
class IndexConfig:
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    k_f: int = DEFAULT_RRF_K
    k_pool: int = DEFAULT_POOL_SIZE


@dataclass
class ScenarioConfig:
    k: int = 3
    ratio: float = 0.5
    seed: int = 0
    pretrain_mix: dict[str, float] = field(default_factory=lambda: {"raw_chunk": 1.0})


@dataclass
class EvalSettings:
    conditions: list[str] = field(default_factory=lambda: ["none", "correct_ctx", "irrelevant_ctx"])
    judge: str = "oracle"
    seed: int = 0


@dataclass
class PipelineConfig:
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    index: IndexConfig = field(default_factory=IndexConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["chunking"]["boundary_preference"] = self.chunking.boundary_preference.value
        return data

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _section(data: dict, name: str, cls):
    try:
        return cls(**data.get(name, {}))
    except (TypeError, ValueError) as exc:
        raise MalformedRecord(0, f"config section {name!r}: {exc}") from exc


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedRecord(exc.lineno, f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedRecord(0, "config root must be an object")
    return PipelineConfig(
        chunking=_section(data, "chunking", ChunkingConfig),
        index=_section(data, "index", IndexConfig),
        augment=_section(data, "augment", AugmentConfig),
        scenario=_section(data, "scenario", ScenarioConfig),
        eval=_section(data, "eval", EvalSettings),
        gateway=_section(data, "gateway", GatewayConfig),
    )
