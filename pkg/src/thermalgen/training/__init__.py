"""Two-phase training orchestration, EMA tracking, and latent-set construction."""

from .ema import EmaShadow, ema_update
from .latents import LatentCode, LatentCodeSet, build_latent_set
from .loop import HistoryWriter, train_gan, train_inversion

__all__ = [
    "EmaShadow",
    "ema_update",
    "LatentCode",
    "LatentCodeSet",
    "build_latent_set",
    "HistoryWriter",
    "train_gan",
    "train_inversion",
]
