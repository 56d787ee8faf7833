"""On-disk tensor and manifest formats.

A dataset is a directory with a ``manifest.json`` plus raw little-endian
float32 row-major tensors: ``rgb/<id>.f32`` (raw color frame, [0, 255]),
``thermal/<id>.f32`` (raw thermal frame, sensor units) and optionally
``mask/<id>.f32`` (binary person mask at the RGB target resolution). Shapes
are implied by the manifest config, which makes the files portable across
implementations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..config import DataConfig
from ..errors import DatasetError

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


def write_f32(path, array: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(array, dtype="<f4")
    path.write_bytes(data.tobytes())


def read_f32(path, shape: Tuple[int, ...], sample_id: Optional[str] = None) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise DatasetError(f"cannot read tensor file {path}: {exc}", sample_id=sample_id)
    expected = int(np.prod(shape)) * 4
    if len(buf) != expected:
        raise DatasetError(
            f"tensor file {path} has {len(buf)} bytes, expected {expected} for shape {shape}",
            sample_id=sample_id,
        )
    return np.frombuffer(buf, dtype="<f4").reshape(shape).copy()


def sample_noise_seed(noise_seed: int, sample_id: str) -> int:
    """Stable per-sample seed for the preprocessing noise draw."""
    digest = hashlib.sha256(f"{noise_seed}:{sample_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ManifestEntry:
    sample_id: str
    rgb_path: str
    thermal_path: str
    mask_path: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "sample_id": self.sample_id,
            "rgb_path": self.rgb_path,
            "thermal_path": self.thermal_path,
            "meta": self.meta,
        }
        if self.mask_path is not None:
            out["mask_path"] = self.mask_path
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestEntry":
        try:
            return cls(
                sample_id=data["sample_id"],
                rgb_path=data["rgb_path"],
                thermal_path=data["thermal_path"],
                mask_path=data.get("mask_path"),
                meta=data.get("meta", {}),
            )
        except KeyError as exc:
            raise DatasetError(f"manifest entry missing key {exc}")


@dataclass
class DatasetManifest:
    root: Path
    config: DataConfig
    entries: List[ManifestEntry]

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {
            "format_version": MANIFEST_VERSION,
            "config": self.config.to_dict(),
            "entries": [e.to_dict() for e in self.entries],
        }

    def save(self) -> None:
        path = Path(self.root) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        path = root if root.name == MANIFEST_NAME else root / MANIFEST_NAME
        if not path.is_file():
            raise DatasetError(f"manifest not found at {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DatasetError(f"manifest {path} is not valid JSON: {exc}")
        version = raw.get("format_version")
        if version != MANIFEST_VERSION:
            raise DatasetError(f"unsupported manifest format_version {version!r}")
        config = DataConfig.from_dict(raw.get("config", {}))
        entries = [ManifestEntry.from_dict(e) for e in raw.get("entries", [])]
        return cls(root=path.parent, config=config, entries=entries)

    def validate(self) -> None:
        """Check that every referenced tensor file exists with the right size."""
        cfg = self.config
        shapes = {
            "rgb_path": (cfg.rgb_raw_height, cfg.rgb_raw_width, 3),
            "thermal_path": (cfg.thermal_raw_height, cfg.thermal_raw_width),
            "mask_path": (cfg.rgb_height, cfg.rgb_width),
        }
        seen = set()
        for entry in self.entries:
            if entry.sample_id in seen:
                raise DatasetError(
                    f"duplicate sample_id {entry.sample_id!r}", sample_id=entry.sample_id
                )
            seen.add(entry.sample_id)
            for attr, shape in shapes.items():
                rel = getattr(entry, attr)
                if rel is None:
                    continue
                read_f32(Path(self.root) / rel, shape, sample_id=entry.sample_id)
