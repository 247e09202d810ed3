"""Flat JSON experiment configs and the bundled presets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

from .batching import SamplerConfig
from .data import SyntheticDataset
from .losses import LossHyperparams
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    seed: int
    loss: str = "mmp"
    epochs: int = 40
    learning_rate: float = 0.2
    scheduler_factor: float = 0.8
    scheduler_patience: int = 3
    lambda_balance: float = 0.3
    triplet_margin: float = 0.1
    anchor_margin: float = 0.15
    anchor_scale: float = 50.0
    sampler_mode: str = "balanced"
    shots_per_class: int = 2
    batch_size: int = 20
    embedding_dim: int = 16
    segment_length: int = 20
    num_trials: int = 400
    num_segments: int = 10
    alpha_init: float = 10.0
    beta_init: float = 0.1
    num_classes: int = 50
    instances_per_class: int = 20
    num_test_classes: int = 10
    test_instances_per_class: int = 20
    feature_dim: int = 64
    latent_dim: int = 16
    min_sequence_length: int = 40
    max_sequence_length: int = 80
    cluster_spread: float = 0.12

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "seed" not in raw:
            raise ConfigError("config must set 'seed'")
        try:
            cfg = cls(**raw)
            cfg.train_config()
            cfg.dataset_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(self.sampler_mode, self.shots_per_class, self.batch_size, self.seed)

    def train_config(self) -> TrainConfig:
        hyper = LossHyperparams(
            lambda_balance=self.lambda_balance,
            triplet_margin=self.triplet_margin,
            anchor_margin=self.anchor_margin,
            anchor_scale=self.anchor_scale,
            shots_per_class=self.shots_per_class,
        )
        return TrainConfig(
            loss_name=self.loss,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            scheduler_factor=self.scheduler_factor,
            scheduler_patience=self.scheduler_patience,
            hyper=hyper,
            sampler=self.sampler_config(),
            seed=self.seed,
            embedding_dim=self.embedding_dim,
            segment_length=self.segment_length,
            num_trials=self.num_trials,
            num_segments=self.num_segments,
            alpha_init=self.alpha_init,
            beta_init=self.beta_init,
        )

    def dataset_config(self) -> SyntheticDataset:
        return SyntheticDataset(
            num_classes=self.num_classes,
            instances_per_class=self.instances_per_class,
            feature_dim=self.feature_dim,
            sequence_length_range=(self.min_sequence_length, self.max_sequence_length),
            cluster_spread=self.cluster_spread,
            seed=self.seed,
            num_test_classes=self.num_test_classes,
            test_instances_per_class=self.test_instances_per_class,
            latent_dim=self.latent_dim,
        )


def read_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def preset_names() -> list[str]:
    root = resources.files("proxyforge") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def read_preset(name: str) -> dict:
    res = resources.files("proxyforge") / "presets" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return json.loads(res.read_text())


def load_experiment(path=None, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Preset values, then file values, then explicit overrides."""
    raw: dict = {}
    if preset:
        raw.update(read_preset(preset))
    if path:
        raw.update(read_json(path))
    if not raw:
        raise ConfigError("give a config file or a preset")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(raw)
