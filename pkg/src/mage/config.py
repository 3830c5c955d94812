"""Pipeline configuration: dataclass defaults, JSON loading, precedence.

Defaults reproduce the reference hyperparameters (AE latent 32, VAE
latent 256 / hidden 512 / dropout 0.2, 4 attention heads, LSTM hidden
128, learning rate 0.001, patience 3, L-BFGS capped at 1000 iterations).
``desk_scale()`` shrinks every width and epoch count so the whole
ablation runs in seconds on synthetic data; both are starting points that
a JSON config file and then command-line flags may override, in that
order of precedence.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

__all__ = [
    "AugmenterSettings",
    "AttentionSettings",
    "ClassifierSettings",
    "PlanSettings",
    "PipelineConfig",
    "load_config_file",
    "merge_overrides",
]


@dataclass(frozen=True)
class AugmenterSettings:
    r_min: float = -0.05
    r_max: float = 0.05
    ae_latent: int = 32
    ae_hidden: tuple = (384, 128)
    ae_dropout: float = 0.2
    ae_lr: float = 0.001
    ae_epochs: int = 50
    ae_batch: int = 64
    dae_corruption: str = "gaussian"  # or "masking"
    dae_sigma: float = 0.1
    dae_mask_rate: float = 0.3
    vae_latent: int = 256
    vae_hidden: int = 512
    vae_dropout: float = 0.2
    vae_beta: float = 1.0
    vae_lr: float = 0.001
    vae_epochs: int = 50
    vae_batch: int = 64


@dataclass(frozen=True)
class AttentionSettings:
    num_heads: int = 4
    temperature: float = 1.0


@dataclass(frozen=True)
class ClassifierSettings:
    lstm_hidden: int = 128
    learning_rate: float = 0.001
    patience: int = 3
    lr_step_size: int = 5
    lr_gamma: float = 0.5
    max_epochs: int = 100
    batch_size: int = 32
    l2: float = 1e-4
    lbfgs_max_iterations: int = 1000
    lbfgs_tol: float = 1e-8
    lbfgs_memory: int = 10


@dataclass(frozen=True)
class PlanSettings:
    n_shuffles: int = 4
    n_iterations: int = 5
    base_seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    augmenters: AugmenterSettings = field(default_factory=AugmenterSettings)
    attention: AttentionSettings = field(default_factory=AttentionSettings)
    classifiers: ClassifierSettings = field(default_factory=ClassifierSettings)
    plan: PlanSettings = field(default_factory=PlanSettings)
    val_fraction: float = 0.1
    train_fraction: float = 7940 / (7940 + 1482)
    num_classes: int = 3

    @classmethod
    def desk_scale(cls) -> "PipelineConfig":
        """Small widths and epoch counts for synthetic desk-scale runs."""
        return cls(
            augmenters=AugmenterSettings(
                ae_latent=8,
                ae_hidden=(16,),
                ae_epochs=15,
                ae_batch=32,
                vae_latent=8,
                vae_hidden=16,
                vae_epochs=15,
                vae_batch=32,
            ),
            classifiers=ClassifierSettings(
                lstm_hidden=16,
                learning_rate=0.01,
                max_epochs=25,
                batch_size=32,
                lbfgs_max_iterations=400,
            ),
            train_fraction=0.8,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return merge_overrides(cls(), data)


_SECTIONS = {
    "augmenters": AugmenterSettings,
    "attention": AttentionSettings,
    "classifiers": ClassifierSettings,
    "plan": PlanSettings,
}


def merge_overrides(base: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Apply a (possibly partial) nested dict of settings on top of ``base``."""
    kwargs = {}
    for key, value in overrides.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            section = getattr(base, key)
            valid = {f.name for f in dataclasses.fields(section)}
            unknown = set(value) - valid
            if unknown:
                raise ConfigError(f"unknown keys in config section {key!r}: {sorted(unknown)}")
            coerced = {
                k: tuple(v) if isinstance(v, list) else v for k, v in value.items()
            }
            kwargs[key] = dataclasses.replace(section, **coerced)
        elif key in ("val_fraction", "train_fraction", "num_classes"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return dataclasses.replace(base, **kwargs)


def load_config_file(path) -> dict:
    """Read a JSON config file into a nested override dict."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data
