"""Exponential moving averages of model parameters.

Update rule per tracked tensor: shadow <- decay * shadow + (1 - decay) * value.
Shadows are what evaluation and online synthesis load.
"""

from __future__ import annotations

from typing import Dict

import torch

from ..errors import DimensionError


def ema_update(shadow: torch.Tensor, params: torch.Tensor, decay: float) -> torch.Tensor:
    """Functional single-tensor update; returns the new shadow."""
    if shadow.shape != params.shape:
        raise DimensionError(
            f"shadow shape {tuple(shadow.shape)} != params shape {tuple(params.shape)}"
        )
    return decay * shadow + (1.0 - decay) * params


class EmaShadow:
    """Tracks shadows for every parameter of a module."""

    def __init__(self, module: torch.nn.Module, decay: float):
        if not 0 <= decay < 1:
            raise ValueError(f"decay must be in [0, 1), got {decay}")
        self.decay = decay
        self.shadows: Dict[str, torch.Tensor] = {
            name: param.detach().clone() for name, param in module.named_parameters()
        }

    @torch.no_grad()
    def update(self, module: torch.nn.Module) -> None:
        for name, param in module.named_parameters():
            shadow = self.shadows[name]
            shadow.mul_(self.decay).add_(param.detach(), alpha=1.0 - self.decay)

    def state_dict(self) -> Dict[str, torch.Tensor]:
        return dict(self.shadows)

    def load_state_dict(self, state: Dict[str, torch.Tensor]) -> None:
        if set(state) != set(self.shadows):
            raise DimensionError("EMA state keys do not match tracked parameters")
        for name, tensor in state.items():
            if tensor.shape != self.shadows[name].shape:
                raise DimensionError(f"EMA shadow {name!r} has wrong shape")
            self.shadows[name] = tensor.detach().clone()

    @torch.no_grad()
    def copy_to(self, module: torch.nn.Module) -> None:
        for name, param in module.named_parameters():
            param.copy_(self.shadows[name])
