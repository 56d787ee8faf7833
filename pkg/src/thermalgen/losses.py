"""Training objectives.

The heatmap reconstruction loss is a masked hinge L1: cells where the person
mask is 0 contribute nothing, and deviations within a tolerance band eps are
free. Per sample the loss is a sum over cells; across a batch we take the
mean of the per-sample sums (batch reduction is a documented choice).

Adversarial terms use the hinge form, gradient regularization is the R1
penalty on real samples, and the inversion objective is a pixel L1.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .errors import DimensionError


def _as_bhw(t: torch.Tensor, name: str) -> torch.Tensor:
    """Normalize (H, W) / (H, W, 1) / (B, H, W) / (B, 1, H, W) to (B, H, W)."""
    if t.ndim == 2:
        return t.unsqueeze(0)
    if t.ndim == 3:
        # trailing singleton = single HxWx1 array, otherwise already (B, H, W)
        if t.shape[2] == 1:
            return t.squeeze(2).unsqueeze(0)
        return t
    if t.ndim == 4 and t.shape[1] == 1:
        return t.squeeze(1)
    raise DimensionError(f"{name} has unsupported shape {tuple(t.shape)}")


def masked_hinge_l1(
    h: torch.Tensor,
    h_hat: torch.Tensor,
    mask: torch.Tensor,
    eps: float,
) -> torch.Tensor:
    """sum over masked cells of max(0, |h - h_hat| - eps); batch-mean reduced."""
    h = _as_bhw(h, "h")
    h_hat = _as_bhw(h_hat, "h_hat")
    mask = _as_bhw(mask, "mask")
    if not (h.shape == h_hat.shape == mask.shape):
        raise DimensionError(
            f"shape mismatch: h {tuple(h.shape)}, h_hat {tuple(h_hat.shape)}, "
            f"mask {tuple(mask.shape)}"
        )
    per_cell = mask * F.relu(torch.abs(h - h_hat) - eps)
    return per_cell.sum(dim=(1, 2)).mean()


def d_hinge_loss(s_real: torch.Tensor, s_fake: torch.Tensor) -> torch.Tensor:
    """mean(max(0, 1 - s_real)) + mean(max(0, 1 + s_fake))."""
    return F.relu(1.0 - s_real).mean() + F.relu(1.0 + s_fake).mean()


def g_hinge_loss(s_fake: torch.Tensor) -> torch.Tensor:
    """-mean(s_fake)."""
    return -s_fake.mean()


def adversarial_losses(s_real: torch.Tensor, s_fake: torch.Tensor):
    """(discriminator loss, generator loss) for the same score tensors."""
    return d_hinge_loss(s_real, s_fake), g_hinge_loss(s_fake)


def r1_gradient_penalty(
    discriminator,
    x_real: torch.Tensor,
    lambda_gp: float,
    create_graph: bool = True,
) -> torch.Tensor:
    """(lambda_gp / 2) * batch-mean squared gradient norm of the score.

    ``create_graph=True`` is required when the result participates in a
    backward pass; gradient-check tests may disable it.
    """
    if x_real.shape[0] < 1:
        raise DimensionError("x_real batch is empty")
    x = x_real.detach().requires_grad_(True)
    score, _ = discriminator(x)
    (grad,) = torch.autograd.grad(
        score.sum(), x, create_graph=create_graph, retain_graph=create_graph
    )
    penalty = grad.reshape(grad.shape[0], -1).square().sum(dim=1).mean()
    return 0.5 * lambda_gp * penalty


def inversion_reconstruction(x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over every pixel and channel."""
    if x.shape != x_hat.shape:
        raise DimensionError(f"shape mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return torch.abs(x - x_hat).mean()


def feature_matching(discriminator, x: torch.Tensor, x_hat: torch.Tensor) -> torch.Tensor:
    """L1 between pooled discriminator trunk features of x and x_hat.

    Optional inversion-phase term, off by default.
    """
    def trunk(inp):
        f = discriminator.entry(inp)
        for block in discriminator.down:
            f = block(f)
        return F.leaky_relu(f, 0.2).mean(dim=(2, 3))

    return torch.abs(trunk(x) - trunk(x_hat)).mean()
