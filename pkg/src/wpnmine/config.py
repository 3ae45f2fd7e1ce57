"""Pipeline configuration: one key=value text file, hashed into artifacts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    seed: int = 1
    min_count: int = 2
    dim: int = 64
    window: int = 5
    negatives: int = 5
    epochs: int = 15
    lr: float = 0.025
    sim_threshold: float = 0.5
    sim_top_k: int = 10
    linkage: str = "average"
    text_weight: float = 0.5
    duplicate_ads_threshold: int = 2
    verdict_ttl_days: float = 30.0
    min_engine_hits: int = 1
    cpm: str = "2.54"
    k_values: tuple[int, ...] = ()  # empty: adaptive schedule
    psl_path: str = ""
    local_blacklist: str = ""
    manual_blacklist: str = ""
    scanner_stub_dir: str = ""

    def to_text(self) -> str:
        """Canonical key=value rendering (sorted keys)."""
        lines = []
        for key, value in sorted(asdict(self).items()):
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, raw: str):
    default = getattr(PipelineConfig(), key)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} needs an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config key {key!r} needs a number, got {raw!r}") from None
    if isinstance(default, tuple):
        if not raw.strip():
            return ()
        try:
            return tuple(int(v.strip()) for v in raw.split(","))
        except ValueError:
            raise ConfigError(f"config key {key!r} needs comma-separated integers") from None
    return raw


def parse_config(text: str) -> PipelineConfig:
    values: dict = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"config line {line_no}: expected key = value, got {raw!r}")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config line {line_no}: unknown key {key!r}")
        values[key] = _coerce(key, value.strip())
    return PipelineConfig(**values)


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"))


def dump_config_json(config: PipelineConfig) -> str:
    payload = asdict(config)
    payload["k_values"] = list(payload["k_values"])
    return json.dumps(payload, sort_keys=True)
