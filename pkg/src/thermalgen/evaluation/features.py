"""Feature extractors used to embed images for distribution-distance metrics.

The default extractor is a small fixed-seed random convolutional embedder: it
is deterministic, needs no downloaded weights, and yields scores that are
internally comparable across runs of this codebase.  It is NOT the Inception
network, so its absolute values are not comparable to scores computed with
Inception features (reference dimension 2048).  An Inception-based backend can
be plugged in via :class:`InceptionFeatures` when torchvision weights are
available locally.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError, DimensionError


class FeatureExtractor:
    """Interface: map a batch of images to an ``(N, dim)`` feature matrix.

    Implementations must be deterministic — embedding the same images twice
    yields bit-identical features.
    """

    dim: int

    def embed(self, images: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def _as_nchw(images: np.ndarray) -> torch.Tensor:
        arr = np.ascontiguousarray(np.asarray(images, dtype=np.float32))
        if arr.ndim != 4 or arr.shape[3] != 3:
            raise DimensionError(
                f"expected images of shape (N, H, W, 3), got {arr.shape}"
            )
        return torch.from_numpy(arr.transpose(0, 3, 1, 2))


class RandomConvFeatures(FeatureExtractor):
    """Fixed-seed random convolutional embedder (default desk-scale backend).

    Three stride-2 conv + LeakyReLU stages followed by global average pooling
    and a random projection.  All weights are drawn once from a seeded
    generator and never trained.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        if dim < 1:
            raise ConfigError(f"feature dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)
        widths = (16, 32, 64)
        layers = []
        in_ch = 3
        for out_ch in widths:
            conv = nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=2, padding=1)
            with torch.no_grad():
                conv.weight.normal_(0.0, (2.0 / (in_ch * 9)) ** 0.5, generator=gen)
                conv.bias.zero_()
            layers += [conv, nn.LeakyReLU(0.2)]
            in_ch = out_ch
        self._trunk = nn.Sequential(*layers)
        proj = nn.Linear(in_ch, dim)
        with torch.no_grad():
            proj.weight.normal_(0.0, (1.0 / in_ch) ** 0.5, generator=gen)
            proj.bias.zero_()
        self._proj = proj
        self._trunk.eval()
        self._proj.eval()
        for p in self._trunk.parameters():
            p.requires_grad_(False)
        for p in self._proj.parameters():
            p.requires_grad_(False)

    def embed(self, images: np.ndarray) -> np.ndarray:
        x = self._as_nchw(images)
        with torch.no_grad():
            feats = self._trunk(x)
            pooled = feats.mean(dim=(2, 3))
            out = self._proj(pooled)
        return out.numpy().astype(np.float64)


class InceptionFeatures(FeatureExtractor):
    """Optional Inception-v3 pool3 backend (dim 2048).

    Requires torchvision with locally available pretrained weights; raises a
    clear error when the dependency or the weights are missing.
    """

    dim = 2048

    def __init__(self):
        try:
            from torchvision.models import Inception_V3_Weights, inception_v3
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise ConfigError(
                "Inception features require torchvision; install it or use "
                "RandomConvFeatures"
            ) from exc
        try:
            model = inception_v3(weights=Inception_V3_Weights.IMAGENET1K_V1)
        except Exception as exc:  # pragma: no cover - needs downloaded weights
            raise ConfigError(
                "Inception weights are unavailable in this environment; use "
                "RandomConvFeatures instead"
            ) from exc
        model.fc = nn.Identity()
        model.eval()
        for p in model.parameters():
            p.requires_grad_(False)
        self._model = model

    def embed(self, images: np.ndarray) -> np.ndarray:  # pragma: no cover
        x = self._as_nchw(images)
        x = torch.nn.functional.interpolate(
            x, size=(299, 299), mode="bilinear", align_corners=False
        )
        with torch.no_grad():
            out = self._model(x)
        return out.numpy().astype(np.float64)


def make_extractor(name: str, dim: int = 32, seed: int = 0) -> FeatureExtractor:
    """Build a named extractor backend (``random-conv`` or ``inception``)."""
    if name == "random-conv":
        return RandomConvFeatures(dim=dim, seed=seed)
    if name == "inception":
        return InceptionFeatures()
    raise ConfigError(f"unknown feature extractor: {name!r}")
