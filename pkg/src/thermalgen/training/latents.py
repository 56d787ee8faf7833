"""Latent code sets: one inverted appearance code per dataset sample.

A latent code set maps every reference photo in a paired dataset to the
256-dimensional code recovered by the (EMA) inversion encoder.  The set is
what the streaming service hands out to operators: pick a code, and every
synthesized frame reuses that appearance under fresh heatmaps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch

from ..config import ModelConfig
from ..errors import BundleError, ConfigError
from ..models.bundle import GROUP_I, GROUP_I_EMA, ModelBundle

FORMAT_VERSION = 1


@dataclass
class LatentCode:
    """A single appearance code with the labels of the sample it came from."""

    code_id: str
    values: np.ndarray  # float32, shape (latent_dim,)
    meta: dict = field(default_factory=dict)

    def validate(self, latent_dim: int) -> None:
        if self.values.shape != (latent_dim,):
            raise ConfigError(
                f"code {self.code_id!r} has shape {self.values.shape}, "
                f"expected ({latent_dim},)"
            )
        if not np.all(np.isfinite(self.values)):
            raise ConfigError(f"code {self.code_id!r} contains non-finite values")


@dataclass
class LatentCodeSet:
    """An ordered collection of latent codes, serializable to a JSON file."""

    latent_dim: int
    codes: List[LatentCode] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.codes)

    def __iter__(self):
        return iter(self.codes)

    def validate(self) -> None:
        seen: set = set()
        for code in self.codes:
            code.validate(self.latent_dim)
            if code.code_id in seen:
                raise ConfigError(f"duplicate code_id {code.code_id!r}")
            seen.add(code.code_id)

    def by_id(self, code_id: str) -> LatentCode:
        for code in self.codes:
            if code.code_id == code_id:
                return code
        raise KeyError(code_id)

    def index_of(self, code_id: str) -> int:
        for i, code in enumerate(self.codes):
            if code.code_id == code_id:
                return i
        raise KeyError(code_id)

    def save(self, path: Path) -> None:
        payload = {
            "format_version": FORMAT_VERSION,
            "latent_dim": self.latent_dim,
            "meta": self.meta,
            "codes": [
                {
                    "code_id": c.code_id,
                    "values": [float(v) for v in c.values],
                    "meta": c.meta,
                }
                for c in self.codes
            ],
        }
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: Path) -> "LatentCodeSet":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        version = payload.get("format_version")
        if version != FORMAT_VERSION:
            raise ConfigError(f"unsupported latent set format_version: {version!r}")
        out = cls(latent_dim=int(payload["latent_dim"]), meta=payload.get("meta", {}))
        for entry in payload["codes"]:
            out.codes.append(
                LatentCode(
                    code_id=entry["code_id"],
                    values=np.asarray(entry["values"], dtype=np.float32),
                    meta=entry.get("meta", {}),
                )
            )
        out.validate()
        return out


def build_latent_set(
    dataset,
    bundle: ModelBundle,
    batch_size: int = 32,
    use_ema: bool = True,
) -> LatentCodeSet:
    """Invert every reference photo in ``dataset`` into an appearance code.

    Uses the EMA inversion-encoder weights when present (the weights used for
    everything downstream of training), falling back to the raw weights only
    when ``use_ema`` is False.
    """
    if use_ema and not (bundle.has_group(GROUP_I_EMA) or bundle.has_group(GROUP_I)):
        raise BundleError("bundle has no trained inversion encoder")
    encoder = bundle.build_inversion(ema=use_ema)
    model_config: ModelConfig = bundle.model_config

    out = LatentCodeSet(
        latent_dim=model_config.latent_dim,
        meta={"n_samples": len(dataset), "ema": bool(use_ema)},
    )
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            indices = list(range(start, min(start + batch_size, len(dataset))))
            batch = dataset.make_batch(indices)
            rgb = torch.from_numpy(np.ascontiguousarray(batch.rgb.transpose(0, 3, 1, 2)))
            z = encoder(rgb).numpy().astype(np.float32)
            for row, index in zip(z, indices):
                sample = dataset[index]
                out.codes.append(
                    LatentCode(
                        code_id=sample.sample_id,
                        values=row,
                        meta=dict(sample.meta or {}),
                    )
                )
    out.validate()
    return out
