"""Procedural desk-scale paired dataset generator.

Each sample is a small scene: a warm person proxy (torso ellipse plus head
disc) standing at a random position with a random lean, in front of a colored
background. The thermal frame encodes the silhouette as warm pixels over an
ambient background; the RGB frame colors the same silhouette with a clothing
color over the environment color; the mask is the silhouette at the RGB
target resolution. Thermal attributes (position, pose) and non-thermal
attributes (clothing, background, skin tone) are sampled independently, which
is exactly the structure the model is supposed to disentangle.

Everything is drawn from one seeded generator with a fixed draw order, so a
given (n, seed, config) always produces byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..config import DataConfig
from ..errors import ConfigError
from .io import DatasetManifest, ManifestEntry, write_f32

# Base colors in [0, 1]; jittered per sample. Labels are the list indices.
CLOTHING_COLORS = [(0.80, 0.18, 0.18), (0.18, 0.30, 0.80), (0.95, 0.80, 0.20)]
ENVIRONMENT_COLORS = [(0.88, 0.86, 0.80), (0.30, 0.42, 0.66), (0.38, 0.62, 0.40)]
SKIN_TONES = [(0.87, 0.72, 0.58), (0.62, 0.46, 0.34)]


@dataclass
class PersonShape:
    """Normalized-scene geometry of one person proxy."""

    center_y: float
    center_x: float
    height: float
    lean: float
    present: bool = True

    @property
    def body_half_h(self) -> float:
        return 0.30 * self.height

    @property
    def body_half_w(self) -> float:
        return 0.16 * self.height

    @property
    def head_radius(self) -> float:
        return 0.115 * self.height

    def head_center(self) -> Tuple[float, float]:
        hy = self.center_y - self.body_half_h - 0.8 * self.head_radius
        hx = self.center_x + self.lean * self.body_half_w
        return hy, hx


def _grid(height: int, width: int):
    ys = (np.arange(height) + 0.5) / height
    xs = (np.arange(width) + 0.5) / width
    return np.meshgrid(ys, xs, indexing="ij")


def render_silhouette(shape: PersonShape, height: int, width: int):
    """Rasterize (body, head) boolean masks on an H x W pixel grid."""
    if not shape.present:
        empty = np.zeros((height, width), dtype=bool)
        return empty, empty
    yy, xx = _grid(height, width)
    # Torso leans by shearing x with the vertical offset from the center.
    sheared_x = xx - shape.lean * (shape.center_y - yy)
    body = (
        ((sheared_x - shape.center_x) / shape.body_half_w) ** 2
        + ((yy - shape.center_y) / shape.body_half_h) ** 2
    ) <= 1.0
    hy, hx = shape.head_center()
    head = ((xx - hx) ** 2 + (yy - hy) ** 2) <= shape.head_radius**2
    return body, head


def sample_person(
    rng: np.random.Generator,
    scale_range: Tuple[float, float],
    present: bool = True,
) -> PersonShape:
    """Draw person geometry; the draw count is fixed regardless of presence."""
    height = rng.uniform(*scale_range)
    lean = rng.uniform(-0.6, 0.6)
    top_extent = 0.30 * height + 1.8 * 0.115 * height
    lo_y, hi_y = 0.03 + top_extent, 0.97 - 0.30 * height
    lo_x, hi_x = 0.05 + 0.25 * height, 0.95 - 0.25 * height
    center_y = rng.uniform(lo_y, max(lo_y + 1e-6, hi_y))
    center_x = rng.uniform(lo_x, max(lo_x + 1e-6, hi_x))
    return PersonShape(center_y, center_x, height, lean, present)


@dataclass
class SynthOptions:
    """Scene statistics; defaults suit the toy training runs."""

    person_scale_min: float = 0.42
    person_scale_max: float = 0.60
    # Fraction of frames with no person at all (presence labels in meta).
    empty_fraction: float = 0.0
    ambient_low: float = 0.10
    ambient_high: float = 0.22
    person_low: float = 0.78
    person_high: float = 0.90
    color_jitter: float = 0.05


def _render_rgb(shape, env_rgb, cloth_rgb, skin_rgb, height, width) -> np.ndarray:
    body, head = render_silhouette(shape, height, width)
    frame = np.empty((height, width, 3), dtype=np.float64)
    frame[:] = np.asarray(env_rgb)
    frame[body] = np.asarray(cloth_rgb)
    frame[head] = np.asarray(skin_rgb)
    return np.clip(frame, 0.0, 1.0) * 255.0


def _render_thermal(shape, ambient, person_temp, height, width) -> np.ndarray:
    body, head = render_silhouette(shape, height, width)
    frame = np.full((height, width), ambient, dtype=np.float64)
    frame[body | head] = person_temp
    return frame


def generate_synthetic_dataset(
    out_dir,
    n: int,
    seed: int,
    data_config: Optional[DataConfig] = None,
    options: Optional[SynthOptions] = None,
) -> DatasetManifest:
    """Write ``n`` paired samples plus a manifest under ``out_dir``."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    cfg = data_config if data_config is not None else DataConfig()
    opts = options if options is not None else SynthOptions()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    span = cfg.temp_max - cfg.temp_min
    entries = []
    for i in range(n):
        sample_id = f"s{i:05d}"
        person_idx = int(rng.integers(len(SKIN_TONES)))
        cloth_idx = int(rng.integers(len(CLOTHING_COLORS)))
        env_idx = int(rng.integers(len(ENVIRONMENT_COLORS)))
        jitter = rng.uniform(-opts.color_jitter, opts.color_jitter, size=(3, 3))
        cloth_rgb = np.asarray(CLOTHING_COLORS[cloth_idx]) + jitter[0]
        env_rgb = np.asarray(ENVIRONMENT_COLORS[env_idx]) + jitter[1]
        skin_rgb = np.asarray(SKIN_TONES[person_idx]) + 0.4 * jitter[2]
        ambient = cfg.temp_min + span * rng.uniform(opts.ambient_low, opts.ambient_high)
        person_temp = cfg.temp_min + span * rng.uniform(opts.person_low, opts.person_high)
        present = bool(rng.uniform() >= opts.empty_fraction)
        shape = sample_person(
            rng, (opts.person_scale_min, opts.person_scale_max), present=present
        )

        raw_rgb = _render_rgb(
            shape, env_rgb, cloth_rgb, skin_rgb, cfg.rgb_raw_height, cfg.rgb_raw_width
        )
        raw_thermal = _render_thermal(
            shape, ambient, person_temp, cfg.thermal_raw_height, cfg.thermal_raw_width
        )
        body, head = render_silhouette(shape, cfg.rgb_height, cfg.rgb_width)
        mask = (body | head).astype(np.float32)

        entry = ManifestEntry(
            sample_id=sample_id,
            rgb_path=f"rgb/{sample_id}.f32",
            thermal_path=f"thermal/{sample_id}.f32",
            mask_path=f"mask/{sample_id}.f32",
            meta={
                "person_id": f"p{person_idx}",
                "clothing": f"c{cloth_idx}",
                "environment": f"e{env_idx}",
                "person_present": present,
                "center": [shape.center_y, shape.center_x] if present else None,
            },
        )
        write_f32(out_dir / entry.rgb_path, raw_rgb)
        write_f32(out_dir / entry.thermal_path, raw_thermal)
        write_f32(out_dir / entry.mask_path, mask)
        entries.append(entry)

    manifest = DatasetManifest(root=out_dir, config=cfg, entries=entries)
    manifest.save()
    return manifest
