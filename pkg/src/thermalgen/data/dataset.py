"""Loading paired samples and serving deterministic shuffled minibatches."""

from __future__ import annotations

import hashlib
import queue
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np

from ..errors import DatasetError, DimensionError
from .io import DatasetManifest, ManifestEntry, read_f32, sample_noise_seed
from .preprocess import preprocess_rgb, preprocess_thermal, resize_mask


@dataclass
class PairedSample:
    """One preprocessed (rgb, heatmap) pair with its optional person mask."""

    sample_id: str
    rgb: np.ndarray
    heatmap: np.ndarray
    mask: Optional[np.ndarray] = None
    mask_lowres: Optional[np.ndarray] = None
    meta: Optional[dict] = None

    def validate(self) -> None:
        hh, hw = self.heatmap.shape[:2]
        if self.heatmap.shape != (hh, hw, 1):
            raise DimensionError(f"heatmap shape {self.heatmap.shape} is not (H, W, 1)")
        if self.rgb.shape != (hh * 8, hw * 8, 3):
            raise DimensionError(
                f"rgb shape {self.rgb.shape} does not match 8x heatmap {(hh, hw)}"
            )
        for name, arr in (("rgb", self.rgb), ("heatmap", self.heatmap)):
            if np.abs(arr).max(initial=0.0) > 1.0 + 1e-6:
                raise DatasetError(f"{name} values outside [-1, 1]", sample_id=self.sample_id)
        if self.mask is not None:
            if self.mask.shape != self.rgb.shape[:2]:
                raise DimensionError(f"mask shape {self.mask.shape} != rgb spatial dims")
            if not np.isin(self.mask, (0.0, 1.0)).all():
                raise DatasetError("mask is not binary", sample_id=self.sample_id)
        if self.mask_lowres is not None and self.mask_lowres.shape != (hh, hw):
            raise DimensionError(f"low-res mask shape {self.mask_lowres.shape} != {(hh, hw)}")


def load_raw_thermal(manifest: DatasetManifest, entry: ManifestEntry) -> np.ndarray:
    cfg = manifest.config
    return read_f32(
        Path(manifest.root) / entry.thermal_path,
        (cfg.thermal_raw_height, cfg.thermal_raw_width),
        sample_id=entry.sample_id,
    )


def load_sample(manifest: DatasetManifest, entry: ManifestEntry) -> PairedSample:
    """Read raw tensors for one entry and run the preprocessing pipeline.

    The additive-noise draw is seeded from (manifest noise_seed, sample_id),
    so repeated loads of the same sample are identical.
    """
    cfg = manifest.config
    root = Path(manifest.root)
    raw_rgb = read_f32(
        root / entry.rgb_path,
        (cfg.rgb_raw_height, cfg.rgb_raw_width, 3),
        sample_id=entry.sample_id,
    )
    raw_thermal = load_raw_thermal(manifest, entry)

    rgb = preprocess_rgb(raw_rgb, (cfg.rgb_height, cfg.rgb_width))
    rng = np.random.default_rng(sample_noise_seed(cfg.noise_seed, entry.sample_id))
    heatmap = preprocess_thermal(
        raw_thermal,
        blur_kernel=cfg.blur_kernel,
        noise_sigma=cfg.noise_sigma,
        target_hw=(cfg.heatmap_height, cfg.heatmap_width),
        norm_range=(cfg.temp_min, cfg.temp_max),
        rng=rng,
    )

    mask = mask_lowres = None
    if entry.mask_path is not None:
        mask = read_f32(
            root / entry.mask_path,
            (cfg.rgb_height, cfg.rgb_width),
            sample_id=entry.sample_id,
        )
        mask_lowres = resize_mask(mask, threshold=cfg.mask_threshold, block=cfg.scale)

    sample = PairedSample(
        sample_id=entry.sample_id,
        rgb=rgb,
        heatmap=heatmap,
        mask=mask,
        mask_lowres=mask_lowres,
        meta=entry.meta,
    )
    sample.validate()
    return sample


@dataclass
class Batch:
    """Stacked arrays for one minibatch (all float32, samples along axis 0)."""

    sample_ids: List[str]
    rgb: np.ndarray
    heatmap: np.ndarray
    mask_lowres: np.ndarray

    def __len__(self) -> int:
        return len(self.sample_ids)


class PairedDataset:
    """Eagerly loaded dataset serving deterministic shuffled minibatches.

    Desk-scale datasets fit in memory, so all samples are preprocessed once at
    construction. Missing masks fall back to all-ones low-res masks (the
    reconstruction loss then covers the full heatmap).
    """

    def __init__(self, manifest: DatasetManifest):
        if len(manifest) == 0:
            raise DatasetError("dataset is empty")
        self.manifest = manifest
        self.samples = [load_sample(manifest, entry) for entry in manifest.entries]

    @classmethod
    def open(cls, root) -> "PairedDataset":
        return cls(DatasetManifest.load(root))

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> PairedSample:
        return self.samples[index]

    def _mask_lowres(self, sample: PairedSample) -> np.ndarray:
        if sample.mask_lowres is not None:
            return sample.mask_lowres
        return np.ones(sample.heatmap.shape[:2], dtype=np.float32)

    def make_batch(self, indices) -> Batch:
        picked = [self.samples[i] for i in indices]
        return Batch(
            sample_ids=[s.sample_id for s in picked],
            rgb=np.stack([s.rgb for s in picked]),
            heatmap=np.stack([s.heatmap for s in picked]),
            mask_lowres=np.stack([self._mask_lowres(s) for s in picked]),
        )

    def epoch_order(self, seed: int, epoch: int) -> np.ndarray:
        """Deterministic shuffle order for one epoch."""
        digest = hashlib.sha256(f"epoch:{seed}:{epoch}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.permutation(len(self.samples))

    def iter_batches(
        self,
        batch_size: int,
        seed: int = 0,
        epoch: int = 0,
        prefetch: int = 0,
    ) -> Iterator[Batch]:
        """One exhaustive epoch of shuffled batches; the short tail is kept.

        With ``prefetch`` > 0 batches are assembled on a background thread,
        but the delivered order always equals the single-threaded order.
        """
        order = self.epoch_order(seed, epoch)
        chunks = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
        if prefetch <= 0:
            for chunk in chunks:
                yield self.make_batch(chunk)
            return

        buf: "queue.Queue" = queue.Queue(maxsize=prefetch)
        sentinel = object()

        def worker():
            for chunk in chunks:
                buf.put(self.make_batch(chunk))
            buf.put(sentinel)

        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        while True:
            item = buf.get()
            if item is sentinel:
                break
            yield item
        thread.join()


def train_test_split(dataset: PairedDataset, test_fraction: float = 0.1, seed: int = 0):
    """Deterministic index split; returns (train_indices, test_indices)."""
    n = len(dataset)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction))) if n > 1 else 0
    return np.sort(order[n_test:]), np.sort(order[:n_test])
