"""Generator throughput benchmark: frames per second at several batch sizes.

Wall-clock measurement of the synthesis forward pass.  Warmup iterations
prime lazy allocations and are excluded; the host hardware is recorded in the
report so numbers from different machines are never confused.  Published
reference figures for the original full-size model on GPU hardware are
recorded alongside for context, not for comparison.
"""

from __future__ import annotations

import os
import platform
import time
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
import torch

from ..config import ModelConfig
from ..errors import ConfigError

# Reference throughput of the full-size model on its original GPU hardware.
REFERENCE_FPS_SINGLE = 11.7
REFERENCE_FPS_BATCH_MAX = 389.0


@dataclass
class BenchRow:
    batch_size: int
    iterations: int
    total_seconds: float
    fps: float  # images per second
    ms_per_image: float


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    hardware: dict = field(default_factory=dict)
    reference: dict = field(
        default_factory=lambda: {
            "fps_single": REFERENCE_FPS_SINGLE,
            "fps_batch_max": REFERENCE_FPS_BATCH_MAX,
            "note": "full-size model on original GPU hardware; context only",
        }
    )

    def to_dict(self) -> dict:
        return {
            "hardware": self.hardware,
            "reference": self.reference,
            "rows": [
                {
                    "batch_size": r.batch_size,
                    "iterations": r.iterations,
                    "total_seconds": r.total_seconds,
                    "fps": r.fps,
                    "ms_per_image": r.ms_per_image,
                }
                for r in self.rows
            ],
        }


def _hardware_info() -> dict:
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "torch_threads": torch.get_num_threads(),
        "torch_version": torch.__version__,
    }


def throughput_bench(
    generator,
    batch_sizes: Sequence[int] = (1, 8),
    iterations: int = 10,
    warmup: int = 2,
    seed: int = 0,
) -> BenchReport:
    """Time generator forwards at each batch size and report images/second."""
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    if any(b < 1 for b in batch_sizes):
        raise ConfigError(f"batch sizes must be >= 1, got {tuple(batch_sizes)}")
    config: ModelConfig = generator.config
    rng = np.random.default_rng(seed)
    report = BenchReport(hardware=_hardware_info())

    generator.eval()
    with torch.no_grad():
        for batch in batch_sizes:
            z = torch.from_numpy(
                rng.standard_normal((batch, config.latent_dim)).astype(np.float32)
            )
            heat = torch.from_numpy(
                rng.uniform(
                    -1.0,
                    1.0,
                    (batch, 1, config.heatmap_height, config.heatmap_width),
                ).astype(np.float32)
            )
            for _ in range(warmup):
                generator(z, heat)
            start = time.perf_counter()
            for _ in range(iterations):
                generator(z, heat)
            elapsed = time.perf_counter() - start
            images = batch * iterations
            fps = images / elapsed if elapsed > 0 else float("inf")
            report.rows.append(
                BenchRow(
                    batch_size=batch,
                    iterations=iterations,
                    total_seconds=elapsed,
                    fps=fps,
                    ms_per_image=1000.0 * elapsed / images,
                )
            )
    return report
