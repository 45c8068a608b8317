"""Pipeline configuration: one JSON document, flags win over file values.

Randomness discipline: ``seed`` is the single master seed; the split and
training stages derive labeled substreams from it unless their own seeds are
pinned explicitly, so each stage is independently reproducible.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .features import DEFAULT_NATIVE_COINS
from .graph import DEFAULT_HUB_CAP
from .ingest import SECONDS_PER_DAY
from .model import TrainConfig
from .rng import derive_seed


@dataclass
class PipelinePaths:
    records: str = "records.csv"
    address_labels: str | None = None
    activity_addresses: str | None = None
    ground_truth: str | None = None
    out_dir: str = "out"


@dataclass
class SplitConfig:
    test_fraction: float = 0.25
    seed: int | None = None  # None: derived from the master seed


@dataclass
class PipelineConfig:
    paths: PipelinePaths = field(default_factory=PipelinePaths)
    record_format: str = "csv"
    strict: bool = False
    hub_cap: int = DEFAULT_HUB_CAP
    native_coins: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_NATIVE_COINS))
    max_lifecycle_days: float = 365.0
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    threshold: float = 0.5
    seed: int = 42
    workers: int = 1

    @property
    def max_lifecycle_seconds(self) -> int:
        return int(self.max_lifecycle_days * SECONDS_PER_DAY)

    def split_seed(self) -> int:
        return self.split.seed if self.split.seed is not None else derive_seed(self.seed, "split")

    def resolved_train_config(self) -> TrainConfig:
        cfg = dataclasses.replace(self.train)
        if cfg.rng_seed is None:
            cfg.rng_seed = derive_seed(self.seed, "train")
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")

        def build(dc_type, raw, where):
            if raw is None:
                return dc_type()
            if not isinstance(raw, dict):
                raise ConfigError(f"{where} must be an object")
            known = {f.name for f in dataclasses.fields(dc_type)}
            unknown = set(raw) - known
            if unknown:
                raise ConfigError(f"unknown {where} fields: {', '.join(sorted(unknown))}")
            try:
                return dc_type(**raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad {where} value: {exc}") from exc

        top_known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - top_known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        kwargs = dict(data)
        kwargs["paths"] = build(PipelinePaths, data.get("paths"), "paths")
        kwargs["train"] = build(TrainConfig, data.get("train"), "train")
        kwargs["split"] = build(SplitConfig, data.get("split"), "split")
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return PipelineConfig.from_dict(data)


def save_config(config: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config.to_json())
        fh.write("\n")
