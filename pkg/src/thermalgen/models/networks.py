"""Generator, discriminator and inversion encoder.

All three are deterministic functions of (inputs, parameters). Internally
tensors are NCHW torch; the ``*_numpy`` helpers accept and return the HWC
float32 arrays used by the data pipeline and the service.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..config import ModelConfig
from ..errors import DimensionError
from .layers import DownResBlock, ResBlock, SpadeSrResBlock, init_fan_in


def _check_heatmap(h: torch.Tensor, config: ModelConfig) -> None:
    if h.shape[1:] != (1, config.heatmap_height, config.heatmap_width):
        raise DimensionError(
            f"heatmap shape {tuple(h.shape[1:])} != "
            f"(1, {config.heatmap_height}, {config.heatmap_width})"
        )


def _check_rgb(x: torch.Tensor, config: ModelConfig) -> None:
    if x.shape[1:] != (3, config.rgb_height, config.rgb_width):
        raise DimensionError(
            f"rgb shape {tuple(x.shape[1:])} != (3, {config.rgb_height}, {config.rgb_width})"
        )


class Generator(nn.Module):
    """Maps (latent code, heatmap) to an RGB image at 8x the heatmap size.

    The semantic branch lifts the heatmap to feature maps at 1x/2x/4x/8x
    resolution; the main branch reshapes the latent code to the heatmap grid
    and runs three upsampling blocks, each modulated by the two adjacent
    semantic taps. A tanh head keeps outputs strictly inside (-1, 1).
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c0, c1, c2, c3 = config.gen_channels
        s = config.sem_channels
        hidden, eps = config.spade_hidden, config.norm_eps

        self.fc = nn.Linear(config.latent_dim, c0 * config.heatmap_height * config.heatmap_width)
        self.sem_stem = ResBlock(1, s)
        self.sem_up = nn.ModuleList(
            [ResBlock(s, s, upsample=True) for _ in range(3)]
        )
        self.blocks = nn.ModuleList(
            [
                SpadeSrResBlock(c0, c1, s, hidden, eps),
                SpadeSrResBlock(c1, c2, s, hidden, eps),
                SpadeSrResBlock(c2, c3, s, hidden, eps),
            ]
        )
        self.to_rgb = nn.Conv2d(c3, 3, 3, padding=1)
        self.reset_parameters()

    def reset_parameters(self, generator=None) -> None:
        heads = [self.to_rgb]
        for block in self.blocks:
            for spade in (block.spade1, block.spade2):
                heads.extend([spade.gamma, spade.beta])
        init_fan_in(self, generator=generator, head_modules=heads)

    def forward(self, z: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        if z.ndim != 2 or z.shape[1] != self.config.latent_dim:
            raise DimensionError(f"latent shape {tuple(z.shape)} != (B, {self.config.latent_dim})")
        _check_heatmap(h, self.config)
        if z.shape[0] != h.shape[0]:
            raise DimensionError("latent and heatmap batch sizes differ")

        sems = [self.sem_stem(h)]
        for block in self.sem_up:
            sems.append(block(sems[-1]))

        c0 = self.config.gen_channels[0]
        f = self.fc(z).view(
            z.shape[0], c0, self.config.heatmap_height, self.config.heatmap_width
        )
        for i, block in enumerate(self.blocks):
            f = block(f, sems[i], sems[i + 1])
        return torch.tanh(self.to_rgb(F.leaky_relu(f, 0.2)))

    @torch.no_grad()
    def synthesize(self, z: np.ndarray, heatmap: np.ndarray) -> np.ndarray:
        """Numpy convenience wrapper: (256,) + (H, W, 1) -> (8H, 8W, 3)."""
        single = z.ndim == 1
        z_t = torch.from_numpy(np.atleast_2d(np.asarray(z, dtype=np.float32)))
        hm = np.asarray(heatmap, dtype=np.float32)
        if single:
            hm = hm[np.newaxis]
        h_t = torch.from_numpy(hm).permute(0, 3, 1, 2)
        out = self.forward(z_t, h_t).permute(0, 2, 3, 1).numpy()
        return out[0] if single else out


class Discriminator(nn.Module):
    """Outputs a realness score and a reconstructed heatmap for an RGB image."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d0, d1, d2, d3 = config.disc_channels
        self.entry = nn.Conv2d(3, d0, 3, padding=1)
        self.down = nn.ModuleList(
            [DownResBlock(d0, d1), DownResBlock(d1, d2), DownResBlock(d2, d3)]
        )
        self.score_fc = nn.Linear(d3, 1)
        self.heat_conv1 = nn.Conv2d(d3, d3, 3, padding=1)
        self.heat_conv2 = nn.Conv2d(d3, 1, 3, padding=1)
        self.reset_parameters()

    def reset_parameters(self, generator=None) -> None:
        init_fan_in(self, generator=generator, head_modules=[self.score_fc, self.heat_conv2])

    def forward(self, x: torch.Tensor):
        _check_rgb(x, self.config)
        f = self.entry(x)
        for block in self.down:
            f = block(f)
        f = F.leaky_relu(f, 0.2)
        score = self.score_fc(f.sum(dim=(2, 3))).squeeze(1)
        heat = self.heat_conv2(F.leaky_relu(self.heat_conv1(f), 0.2))
        return score, heat


class InversionEncoder(nn.Module):
    """Maps an RGB image to its 256-d non-thermal latent code."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        e0, e1, e2, e3 = config.inv_channels
        self.entry = nn.Conv2d(3, e0, 3, padding=1)
        self.down = nn.ModuleList(
            [DownResBlock(e0, e1), DownResBlock(e1, e2), DownResBlock(e2, e3)]
        )
        self.fc = nn.Linear(e3, config.latent_dim)
        self.reset_parameters()

    def reset_parameters(self, generator=None) -> None:
        init_fan_in(self, generator=generator, head_modules=[self.fc])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_rgb(x, self.config)
        f = self.entry(x)
        for block in self.down:
            f = block(f)
        f = F.leaky_relu(f, 0.2)
        return self.fc(f.mean(dim=(2, 3)))

    @torch.no_grad()
    def invert(self, rgb: np.ndarray) -> np.ndarray:
        """Numpy convenience wrapper: (H, W, 3) -> (256,)."""
        single = rgb.ndim == 3
        arr = np.asarray(rgb, dtype=np.float32)
        if single:
            arr = arr[np.newaxis]
        x = torch.from_numpy(arr).permute(0, 3, 1, 2)
        out = self.forward(x).numpy()
        return out[0] if single else out


def build_models(config: ModelConfig, seed: int = 0):
    """Construct (G, D, I) with deterministic fan-in initialization."""
    nets = []
    for offset, cls in enumerate((Generator, Discriminator, InversionEncoder)):
        gen = torch.Generator().manual_seed(seed * 3 + offset)
        net = cls(config)
        net.reset_parameters(generator=gen)
        nets.append(net)
    return tuple(nets)
