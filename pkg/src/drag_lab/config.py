"""Configuration tree, loadable from JSON or TOML files.

Section and key names are the wire contract for config files and checkpoint
snapshots: ``schedule.T``, ``feature.t_star``, ``feature.layer``, plus the
``data``, ``model``, and ``train`` sections.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .denoiser import DenoiserConfig

FEATURE_LAYERS = ("decoder_out",)


@dataclass(frozen=True)
class ScheduleConfig:
    T: int = 250
    kind: str = "linear"


@dataclass(frozen=True)
class FeatureConfig:
    t_star: int = 0          # 0 means "use T // 2"
    layer: str = "decoder_out"
    seed: int = 0

    def __post_init__(self):
        if self.layer not in FEATURE_LAYERS:
            raise ValueError(f"feature.layer must be one of {FEATURE_LAYERS}, "
                             f"got {self.layer!r}")

    def resolve_t_star(self, num_steps: int) -> int:
        return self.t_star if self.t_star > 0 else max(1, num_steps // 2)


@dataclass(frozen=True)
class DataConfig:
    length: int = 8
    height: int = 64
    width: int = 64
    n_shapes: int = 2


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 5000
    learning_rate: float = 1e-4
    weight_decay: float = 1e-2
    batch_size: int = 4
    seed: int = 0
    use_entity: bool = True
    use_gaussian: bool = True
    use_loss_mask: bool = True
    # Relative weight of out-of-mask pixels when the loss mask is on. The
    # masked objective alone leaves the background unsupervised, which a
    # model trained from scratch (no pretrained prior) cannot afford.
    background_weight: float = 0.1
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"train.steps must be >= 1, got {self.steps}")
        if self.batch_size < 1:
            raise ValueError(f"train.batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class Config:
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    model: DenoiserConfig = field(default_factory=DenoiserConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "Config":
        sections = {"data": DataConfig, "schedule": ScheduleConfig,
                    "feature": FeatureConfig, "model": DenoiserConfig,
                    "train": TrainConfig}
        kwargs = {}
        for name, section_cls in sections.items():
            payload = dict(doc.get(name, {}))
            unknown = set(payload) - {f.name for f in dataclasses.fields(section_cls)}
            if unknown:
                raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
            if "channel_multipliers" in payload:
                payload["channel_multipliers"] = tuple(payload["channel_multipliers"])
            kwargs[name] = section_cls(**payload)
        unknown = set(doc) - set(sections)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(**kwargs)


def load_config(path) -> Config:
    path = Path(path)
    text = path.read_text("utf-8")
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    return Config.from_dict(doc)
