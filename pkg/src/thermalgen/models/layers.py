"""Building blocks: spatially-adaptive modulation and residual blocks.

The conditioning mechanism normalizes a feature map with parameter-free
per-channel standardization, then applies a learned per-pixel scale and shift
computed from a semantic input by small convolutions:

    out = normalize(feature) * (1 + gamma(sem)) + beta(sem)

The semantic input here is the progressively upsampled thermal branch rather
than a segmentation map.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from ..errors import DimensionError


def param_free_norm(feature: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Per-sample, per-channel standardization over spatial dims (no affine)."""
    mean = feature.mean(dim=(2, 3), keepdim=True)
    var = feature.var(dim=(2, 3), unbiased=False, keepdim=True)
    return (feature - mean) / torch.sqrt(var + eps)


class SpadeModulation(nn.Module):
    """normalize(feature) * (1 + gamma) + beta with conv-predicted gamma/beta."""

    def __init__(self, feature_channels: int, semantic_channels: int, hidden: int = 64,
                 eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.shared = nn.Conv2d(semantic_channels, hidden, 3, padding=1)
        self.gamma = nn.Conv2d(hidden, feature_channels, 3, padding=1)
        self.beta = nn.Conv2d(hidden, feature_channels, 3, padding=1)

    def forward(self, feature: torch.Tensor, semantic: torch.Tensor) -> torch.Tensor:
        if feature.shape[2:] != semantic.shape[2:]:
            raise DimensionError(
                f"feature spatial dims {tuple(feature.shape[2:])} != "
                f"semantic {tuple(semantic.shape[2:])}"
            )
        normalized = param_free_norm(feature, self.eps)
        actv = F.relu(self.shared(semantic))
        return normalized * (1.0 + self.gamma(actv)) + self.beta(actv)


class ResBlock(nn.Module):
    """conv-LReLU-conv with a skip path; optional 2x nearest upsampling at entry."""

    def __init__(self, in_channels: int, out_channels: int, upsample: bool = False):
        super().__init__()
        self.upsample = upsample
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = (
            nn.Conv2d(in_channels, out_channels, 1)
            if in_channels != out_channels
            else nn.Identity()
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.upsample:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
        y = F.leaky_relu(self.conv1(x), 0.2)
        y = self.conv2(y)
        return y + self.skip(x)


class SpadeSrResBlock(nn.Module):
    """Upsampling residual block driven by two semantic taps.

    The first modulation runs at the input resolution with the matching
    semantic map; the block then upsamples 2x and the second modulation runs
    at the output resolution with the next semantic map. The skip path is a
    1x1 conv on the upsampled input.
    """

    def __init__(self, in_channels: int, out_channels: int, semantic_channels: int,
                 hidden: int = 64, eps: float = 1e-5):
        super().__init__()
        self.spade1 = SpadeModulation(in_channels, semantic_channels, hidden, eps)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.spade2 = SpadeModulation(out_channels, semantic_channels, hidden, eps)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = nn.Conv2d(in_channels, out_channels, 1)

    def forward(self, feature, sem_in, sem_out):
        y = F.leaky_relu(self.spade1(feature, sem_in), 0.2)
        y = F.interpolate(y, scale_factor=2, mode="nearest")
        y = self.conv1(y)
        y = F.leaky_relu(self.spade2(y, sem_out), 0.2)
        y = self.conv2(y)
        skip = self.skip(F.interpolate(feature, scale_factor=2, mode="nearest"))
        return y + skip


class DownResBlock(nn.Module):
    """conv-LReLU-conv followed by 2x average pooling, with pooled skip."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = (
            nn.Conv2d(in_channels, out_channels, 1)
            if in_channels != out_channels
            else nn.Identity()
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.conv1(F.leaky_relu(x, 0.2))
        y = self.conv2(F.leaky_relu(y, 0.2))
        y = F.avg_pool2d(y, 2)
        return y + F.avg_pool2d(self.skip(x), 2)


def init_fan_in(module: nn.Module, generator=None, head_modules=()) -> None:
    """Zero-mean Gaussian init scaled by fan-in; biases zero.

    Hidden layers use std sqrt(2/fan_in) (leaky-ReLU gain), output heads
    listed in ``head_modules`` use sqrt(1/fan_in).
    """
    heads = set()
    for head in head_modules:
        heads.update(id(p) for p in head.parameters())
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                weight = m.weight
                if isinstance(m, nn.Conv2d):
                    fan_in = weight.shape[1] * weight.shape[2] * weight.shape[3]
                else:
                    fan_in = weight.shape[1]
                gain = 1.0 if id(weight) in heads else 2.0
                std = (gain / fan_in) ** 0.5
                weight.normal_(0.0, std, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
