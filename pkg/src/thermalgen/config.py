"""Dataclass configs with JSON round-trip and strict unknown-key rejection.

Every experiment artifact (dataset manifest, checkpoint, history file) embeds
the resolved config that produced it, so a run can be reproduced from its
outputs alone.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError

# Spatial ratio between the synthesized RGB image and the conditioning
# heatmap. Fixed by the three 2x upsampling stages of the generator.
RGB_TO_HEATMAP_SCALE = 8


def _check_fields(cls, data: dict) -> None:
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"unknown key(s) for {cls.__name__}: {sorted(unknown)}; "
            f"known keys: {sorted(known)}"
        )


class _JsonMixin:
    """from_dict / to_dict / JSON file helpers for flat config dataclasses."""

    @classmethod
    def from_dict(cls, data: dict):
        _check_fields(cls, data)
        coerced = {}
        for f in dataclasses.fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            if isinstance(value, list):
                value = tuple(value)
            coerced[f.name] = value
        return cls(**coerced)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


@dataclass
class DataConfig(_JsonMixin):
    """Geometry and preprocessing parameters of a paired thermal/RGB dataset.

    The RGB target size is always ``scale`` times the heatmap size; raw file
    sizes must be integer multiples of the respective targets. Temperatures
    are in the raw sensor unit (degrees Celsius for the synthetic sets).
    """

    heatmap_height: int = 12
    heatmap_width: int = 16
    thermal_raw_height: int = 120
    thermal_raw_width: int = 160
    rgb_raw_height: int = 192
    rgb_raw_width: int = 256
    temp_min: float = 18.0
    temp_max: float = 38.0
    blur_kernel: int = 3
    # None means 5% of the (temp_min, temp_max) span, resolved in __post_init__.
    noise_sigma: Optional[float] = None
    noise_seed: int = 0
    mask_threshold: float = 0.5
    scale: int = RGB_TO_HEATMAP_SCALE

    def __post_init__(self):
        if self.temp_min >= self.temp_max:
            raise ConfigError(
                f"temp_min ({self.temp_min}) must be < temp_max ({self.temp_max})"
            )
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ConfigError(f"blur_kernel must be odd and positive, got {self.blur_kernel}")
        if self.noise_sigma is None:
            self.noise_sigma = 0.05 * (self.temp_max - self.temp_min)
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.scale != RGB_TO_HEATMAP_SCALE:
            raise ConfigError(f"scale is fixed at {RGB_TO_HEATMAP_SCALE}")

    @property
    def rgb_height(self) -> int:
        return self.heatmap_height * self.scale

    @property
    def rgb_width(self) -> int:
        return self.heatmap_width * self.scale


@dataclass
class ModelConfig(_JsonMixin):
    """Architecture hyperparameters for the generator/discriminator/encoder."""

    heatmap_height: int = 12
    heatmap_width: int = 16
    latent_dim: int = 256
    # Main-branch widths: entry stage at heatmap resolution plus one width per
    # 2x upsampling stage (three stages -> the fixed 8x spatial ratio).
    gen_channels: tuple = (256, 128, 64, 32)
    sem_channels: int = 64
    spade_hidden: int = 64
    disc_channels: tuple = (32, 64, 128, 256)
    inv_channels: tuple = (32, 64, 128, 256)
    norm_eps: float = 1e-5

    def __post_init__(self):
        if self.latent_dim != 256:
            raise ConfigError("latent codes are 256-dimensional by contract")
        if len(self.gen_channels) != 4:
            raise ConfigError("gen_channels needs 4 entries (entry + 3 upsampling stages)")
        if len(self.disc_channels) != 4 or len(self.inv_channels) != 4:
            raise ConfigError("disc_channels / inv_channels need 4 entries")

    @property
    def rgb_height(self) -> int:
        return self.heatmap_height * RGB_TO_HEATMAP_SCALE

    @property
    def rgb_width(self) -> int:
        return self.heatmap_width * RGB_TO_HEATMAP_SCALE


@dataclass
class LossConfig(_JsonMixin):
    """Weights and tolerances of the training objectives."""

    epsilon: float = 0.1
    lambda_rec: float = 1.0
    lambda_gp: float = 10.0
    lambda_inv: float = 1.0
    # Optional discriminator-feature-matching term for the inversion phase.
    feature_matching: bool = False
    lambda_fm: float = 1.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        for name in ("lambda_rec", "lambda_gp", "lambda_inv", "lambda_fm"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")


# Per-phase defaults: (ema_decay, epochs).
_PHASE_DEFAULTS = {"gan": (0.999, 400), "inversion": (0.99, 50)}


@dataclass
class TrainConfig(_JsonMixin):
    """Optimization schedule for one training phase.

    Defaults follow the Adam/EMA settings the model was designed with:
    beta1=0, beta2=0.999, lr 2e-4 for the discriminator and 5e-5 for the
    generator or inversion encoder, batch 128, one D step per G/I step, EMA
    decay 0.999 (gan) / 0.99 (inversion), 400 / 50 epochs.
    """

    phase: str = "gan"
    lr_d: float = 2e-4
    lr_gi: float = 5e-5
    beta1: float = 0.0
    beta2: float = 0.999
    batch_size: int = 128
    update_ratio: int = 1
    ema_decay: Optional[float] = None
    epochs: Optional[int] = None
    seed: int = 0
    # Hard cap on optimizer steps; None runs the full epoch budget.
    max_steps: Optional[int] = None
    # Whether the discriminator keeps training during the inversion phase.
    train_d_in_inversion: bool = True
    log_every: int = 1
    checkpoint_every: Optional[int] = None

    def __post_init__(self):
        if self.phase not in _PHASE_DEFAULTS:
            raise ConfigError(f"phase must be one of {sorted(_PHASE_DEFAULTS)}, got {self.phase!r}")
        defaults = _PHASE_DEFAULTS[self.phase]
        if self.ema_decay is None:
            self.ema_decay = defaults[0]
        if self.epochs is None:
            self.epochs = defaults[1]
        if self.lr_d <= 0 or self.lr_gi <= 0:
            raise ConfigError("learning rates must be > 0")
        if not 0 <= self.ema_decay < 1:
            raise ConfigError(f"ema_decay must be in [0, 1), got {self.ema_decay}")
        if self.update_ratio < 1:
            raise ConfigError(f"update_ratio must be >= 1, got {self.update_ratio}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class ServiceConfig(_JsonMixin):
    """Runtime settings of the streaming service."""

    host: str = "127.0.0.1"
    port: int = 8765
    # Replay pacing; the thermal source used for the datasets runs at 8.7 fps.
    fps: float = 8.7
    encode: str = "png"
    loop: bool = False
    # Shut the whole server down once a non-looping replay is exhausted.
    exit_when_done: bool = False
    ui_dir: Optional[str] = None

    def __post_init__(self):
        if self.fps <= 0:
            raise ConfigError(f"fps must be > 0, got {self.fps}")
        if self.encode not in ("png", "jpeg"):
            raise ConfigError(f"encode must be 'png' or 'jpeg', got {self.encode!r}")


_SECTION_TYPES = {
    "data": DataConfig,
    "model": ModelConfig,
    "loss": LossConfig,
    "train_gan": TrainConfig,
    "train_inversion": TrainConfig,
    "service": ServiceConfig,
}


@dataclass
class ExperimentConfig:
    """Top-level config file: one optional section per subsystem."""

    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train_gan: TrainConfig = field(default_factory=lambda: TrainConfig(phase="gan"))
    train_inversion: TrainConfig = field(default_factory=lambda: TrainConfig(phase="inversion"))
    service: ServiceConfig = field(default_factory=ServiceConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(_SECTION_TYPES)
        if unknown:
            raise ConfigError(
                f"unknown config section(s): {sorted(unknown)}; "
                f"known sections: {sorted(_SECTION_TYPES)}"
            )
        kwargs = {}
        for name, section_cls in _SECTION_TYPES.items():
            if name in data:
                section = dict(data[name])
                if name == "train_gan":
                    section.setdefault("phase", "gan")
                elif name == "train_inversion":
                    section.setdefault("phase", "inversion")
                kwargs[name] = section_cls.from_dict(section)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_dict() for name in _SECTION_TYPES}

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        return cls.from_dict(raw)

    def to_json(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    def apply_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply dotted ``section.key -> value`` overrides, returning a new config.

        Values are parsed as JSON when possible so numbers and booleans keep
        their types; anything unparseable stays a string.
        """
        raw = self.to_dict()
        for dotted, value in overrides.items():
            if "." not in dotted:
                raise ConfigError(f"override key must look like section.key, got {dotted!r}")
            section, key = dotted.split(".", 1)
            if section not in raw:
                raise ConfigError(f"unknown config section {section!r} in override {dotted!r}")
            if isinstance(value, str):
                try:
                    value = json.loads(value)
                except json.JSONDecodeError:
                    pass
            raw[section][key] = value
        return ExperimentConfig.from_dict(raw)
