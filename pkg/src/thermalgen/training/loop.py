"""Two-phase training orchestration.

Phase 1 (gan): alternate discriminator and generator steps on (rgb, heatmap)
batches. The discriminator minimizes hinge adversarial loss, the masked
hinge-L1 heatmap reconstruction on both real and generated images, and an R1
gradient penalty on reals. The generator minimizes the hinge generator loss
plus the same heatmap reconstruction through the discriminator's head. The
generator keeps an EMA shadow (decay 0.999 by default).

Phase 2 (inversion): the generator is frozen; the inversion encoder minimizes
pixel L1 between x and G(I(x), h_x), with its own EMA (decay 0.99). The
discriminator optionally keeps training adversarially against the
reconstructions (on by default).

Runs are deterministic per seed, and checkpoints carry enough state
(parameters, EMA shadows, Adam moments, RNG state, epoch/batch cursor) that
an interrupted run resumed from step k finishes bit-identically to an
uninterrupted one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch

from ..config import LossConfig, ModelConfig, TrainConfig
from ..data.dataset import Batch, PairedDataset
from ..errors import BundleError, ConfigError, TrainingDivergedError
from ..losses import (
    d_hinge_loss,
    feature_matching,
    g_hinge_loss,
    inversion_reconstruction,
    masked_hinge_l1,
    r1_gradient_penalty,
)
from ..models.bundle import (
    GROUP_D,
    GROUP_G,
    GROUP_G_EMA,
    GROUP_I,
    GROUP_I_EMA,
    ModelBundle,
    load_bundle,
    save_bundle,
)
from ..models.networks import Discriminator, Generator, InversionEncoder, build_models
from .ema import EmaShadow


def batch_to_tensors(batch: Batch) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """HWC numpy batch -> NCHW torch tensors (rgb, heatmap, lowres mask)."""
    rgb = torch.from_numpy(batch.rgb).permute(0, 3, 1, 2).contiguous()
    heat = torch.from_numpy(batch.heatmap).permute(0, 3, 1, 2).contiguous()
    mask = torch.from_numpy(batch.mask_lowres).contiguous()
    return rgb, heat, mask


def _make_adam(params, lr: float, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=lr, betas=(config.beta1, config.beta2))


def _optimizer_to_bundle(bundle: ModelBundle, prefix: str, module, opt) -> None:
    steps = {}
    for name, param in module.named_parameters():
        state = opt.state.get(param)
        if not state:
            continue
        bundle.tensors[f"{prefix}/{name}/exp_avg"] = (
            state["exp_avg"].detach().numpy().astype(np.float32)
        )
        bundle.tensors[f"{prefix}/{name}/exp_avg_sq"] = (
            state["exp_avg_sq"].detach().numpy().astype(np.float32)
        )
        steps[name] = float(state["step"])
    bundle.meta.setdefault("adam_steps", {})[prefix] = steps


def _optimizer_from_bundle(bundle: ModelBundle, prefix: str, module, opt) -> None:
    steps = bundle.meta.get("adam_steps", {}).get(prefix, {})
    for name, param in module.named_parameters():
        key_avg = f"{prefix}/{name}/exp_avg"
        if key_avg not in bundle.tensors:
            continue
        opt.state[param] = {
            "step": torch.tensor(steps[name], dtype=torch.float32),
            "exp_avg": torch.from_numpy(bundle.tensors[key_avg].copy()),
            "exp_avg_sq": torch.from_numpy(
                bundle.tensors[f"{prefix}/{name}/exp_avg_sq"].copy()
            ),
        }


def _check_finite(step: int, values: Dict[str, float]) -> None:
    bad = {
        k: v
        for k, v in values.items()
        if isinstance(v, float) and not math.isfinite(v)
    }
    if bad:
        raise TrainingDivergedError(f"non-finite loss at step {step}: {bad}")


class HistoryWriter:
    """JSON-lines history; key order fixed for reproducible bytes.

    Fresh runs truncate any stale file; resumed runs append.
    """

    def __init__(self, path: Optional[Path], resume: bool = False):
        self.path = Path(path) if path is not None else None
        self.records: List[dict] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a" if resume else "w", encoding="utf-8")
        else:
            self._fh = None

    def append(self, record: dict) -> None:
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


@dataclass
class _Cursor:
    """Position within the deterministic epoch/batch schedule."""

    step: int = 0
    epoch: int = 0
    batch_index: int = 0


def _schedule(dataset_len: int, config: TrainConfig) -> Tuple[int, int]:
    batches_per_epoch = math.ceil(dataset_len / config.batch_size)
    total = config.epochs * batches_per_epoch
    if config.max_steps is not None:
        total = min(total, config.max_steps)
    return batches_per_epoch, total


def _rng_hex(gen: torch.Generator) -> str:
    return gen.get_state().numpy().tobytes().hex()


def _rng_from_hex(gen: torch.Generator, hexstate: str) -> None:
    gen.set_state(torch.from_numpy(
        np.frombuffer(bytes.fromhex(hexstate), dtype=np.uint8).copy()
    ))


def train_gan(
    dataset: PairedDataset,
    model_config: ModelConfig,
    loss_config: LossConfig,
    config: TrainConfig,
    out_dir=None,
    resume_from=None,
) -> Tuple[ModelBundle, List[dict]]:
    """Run the GAN phase; returns the final bundle and per-step history."""
    if config.phase != "gan":
        raise ConfigError(f"train_gan needs phase 'gan', got {config.phase!r}")
    if len(dataset) == 0:
        raise ConfigError("dataset is empty")

    out_dir = Path(out_dir) if out_dir is not None else None
    gen, disc, _ = build_models(model_config, seed=config.seed)
    z_rng = torch.Generator().manual_seed(config.seed + 1)
    opt_d = _make_adam(disc.parameters(), config.lr_d, config)
    opt_g = _make_adam(gen.parameters(), config.lr_gi, config)
    ema_g = EmaShadow(gen, config.ema_decay)
    cursor = _Cursor()

    if resume_from is not None:
        ckpt = load_bundle(resume_from, expect_model_config=model_config)
        if ckpt.meta.get("phase") != "gan":
            raise BundleError("checkpoint is not from the gan phase")
        ckpt.load_into(GROUP_G, gen)
        ckpt.load_into(GROUP_D, disc)
        ema_g.load_state_dict(ckpt.get_state_dict(GROUP_G_EMA))
        _optimizer_from_bundle(ckpt, "opt_g", gen, opt_g)
        _optimizer_from_bundle(ckpt, "opt_d", disc, opt_d)
        _rng_from_hex(z_rng, ckpt.meta["rng_hex"])
        cursor = _Cursor(
            step=ckpt.meta["step"],
            epoch=ckpt.meta["epoch"],
            batch_index=ckpt.meta["batch_index"],
        )

    batches_per_epoch, total_steps = _schedule(len(dataset), config)
    history = HistoryWriter(
        out_dir / "history_gan.jsonl" if out_dir else None, resume=resume_from is not None
    )
    lam_rec, lam_gp, eps = loss_config.lambda_rec, loss_config.lambda_gp, loss_config.epsilon

    def checkpoint(tag: Optional[str] = None) -> ModelBundle:
        bundle = ModelBundle(model_config=model_config, meta={})
        bundle.put_state_dict(GROUP_G, gen.state_dict())
        bundle.put_state_dict(GROUP_D, disc.state_dict())
        bundle.put_state_dict(GROUP_G_EMA, ema_g.state_dict())
        _optimizer_to_bundle(bundle, "opt_g", gen, opt_g)
        _optimizer_to_bundle(bundle, "opt_d", disc, opt_d)
        bundle.meta.update(
            {
                "phase": "gan",
                "step": cursor.step,
                "epoch": cursor.epoch,
                "batch_index": cursor.batch_index,
                "rng_hex": _rng_hex(z_rng),
                "train_config": config.to_dict(),
                "loss_config": loss_config.to_dict(),
            }
        )
        if out_dir is not None and tag is not None:
            save_bundle(out_dir / f"checkpoint_gan_{tag}.tgb", bundle)
        return bundle

    while cursor.step < total_steps and cursor.epoch < config.epochs:
        order = dataset.epoch_order(config.seed, cursor.epoch)
        chunks = [
            order[i : i + config.batch_size]
            for i in range(0, len(order), config.batch_size)
        ]
        while cursor.batch_index < len(chunks) and cursor.step < total_steps:
            batch = dataset.make_batch(chunks[cursor.batch_index])
            x_real, heat, mask = batch_to_tensors(batch)
            bsz = x_real.shape[0]

            # --- discriminator step ---
            z = torch.randn(bsz, model_config.latent_dim, generator=z_rng)
            with torch.no_grad():
                x_fake = gen(z, heat)
            s_real, hhat_real = disc(x_real)
            s_fake, hhat_fake = disc(x_fake)
            d_adv = d_hinge_loss(s_real, s_fake)
            d_rec_real = masked_hinge_l1(heat, hhat_real, mask, eps)
            d_rec_fake = masked_hinge_l1(heat, hhat_fake, mask, eps)
            d_r1 = r1_gradient_penalty(disc, x_real, lam_gp)
            d_total = d_adv + lam_rec * (d_rec_real + d_rec_fake) + d_r1
            opt_d.zero_grad()
            d_total.backward()
            opt_d.step()

            record = {
                "phase": "gan",
                "step": cursor.step + 1,
                "epoch": cursor.epoch,
                "d_adv": d_adv.item(),
                "d_rec_real": d_rec_real.item(),
                "d_rec_fake": d_rec_fake.item(),
                "d_r1": d_r1.item(),
                "d_total": d_total.item(),
                "g_adv": None,
                "g_rec": None,
                "g_total": None,
            }

            # --- generator step (every update_ratio-th cycle) ---
            if (cursor.step + 1) % config.update_ratio == 0:
                z2 = torch.randn(bsz, model_config.latent_dim, generator=z_rng)
                x_fake2 = gen(z2, heat)
                s_fake2, hhat_fake2 = disc(x_fake2)
                g_adv = g_hinge_loss(s_fake2)
                g_rec = masked_hinge_l1(heat, hhat_fake2, mask, eps)
                g_total = g_adv + lam_rec * g_rec
                opt_g.zero_grad()
                g_total.backward()
                opt_g.step()
                ema_g.update(gen)
                record.update(
                    g_adv=g_adv.item(), g_rec=g_rec.item(), g_total=g_total.item()
                )

            cursor.step += 1
            cursor.batch_index += 1
            _check_finite(cursor.step, record)
            if cursor.step % config.log_every == 0:
                history.append(record)
            if (
                config.checkpoint_every is not None
                and cursor.step % config.checkpoint_every == 0
            ):
                checkpoint(tag=f"{cursor.step:06d}")
        if cursor.batch_index >= len(chunks):
            cursor.epoch += 1
            cursor.batch_index = 0

    final = checkpoint(tag=None)
    history.close()
    return final, history.records


def train_inversion(
    dataset: PairedDataset,
    bundle: ModelBundle,
    loss_config: LossConfig,
    config: TrainConfig,
    out_dir=None,
    resume_from=None,
) -> Tuple[ModelBundle, List[dict]]:
    """Run the inversion phase on top of a GAN-phase bundle.

    The generator is frozen (its parameters are bit-identical before and
    after); the returned bundle keeps all existing groups and adds the
    trained encoder plus its EMA shadow.
    """
    if config.phase != "inversion":
        raise ConfigError(f"train_inversion needs phase 'inversion', got {config.phase!r}")
    if not bundle.has_group(GROUP_G):
        raise ConfigError("bundle has no trained generator; run the gan phase first")

    model_config = bundle.model_config
    out_dir = Path(out_dir) if out_dir is not None else None

    gen = Generator(model_config)
    bundle.load_into(GROUP_G, gen)
    for p in gen.parameters():
        p.requires_grad_(False)
    gen.eval()

    disc = Discriminator(model_config)
    bundle.load_into(GROUP_D, disc)

    inv = InversionEncoder(model_config)
    init_rng = torch.Generator().manual_seed(config.seed * 3 + 2)
    inv.reset_parameters(generator=init_rng)

    z_rng = torch.Generator().manual_seed(config.seed + 2)
    opt_i = _make_adam(inv.parameters(), config.lr_gi, config)
    opt_d = _make_adam(disc.parameters(), config.lr_d, config)
    ema_i = EmaShadow(inv, config.ema_decay)
    cursor = _Cursor()

    if resume_from is not None:
        ckpt = load_bundle(resume_from, expect_model_config=model_config)
        if ckpt.meta.get("phase") != "inversion":
            raise BundleError("checkpoint is not from the inversion phase")
        ckpt.load_into(GROUP_I, inv)
        ckpt.load_into(GROUP_D, disc)
        ema_i.load_state_dict(ckpt.get_state_dict(GROUP_I_EMA))
        _optimizer_from_bundle(ckpt, "opt_i", inv, opt_i)
        _optimizer_from_bundle(ckpt, "opt_d", disc, opt_d)
        _rng_from_hex(z_rng, ckpt.meta["rng_hex"])
        cursor = _Cursor(
            step=ckpt.meta["step"],
            epoch=ckpt.meta["epoch"],
            batch_index=ckpt.meta["batch_index"],
        )

    batches_per_epoch, total_steps = _schedule(len(dataset), config)
    history = HistoryWriter(
        out_dir / "history_inversion.jsonl" if out_dir else None,
        resume=resume_from is not None,
    )
    lam_rec, lam_gp, eps = loss_config.lambda_rec, loss_config.lambda_gp, loss_config.epsilon

    def checkpoint(tag: Optional[str] = None) -> ModelBundle:
        out = ModelBundle(model_config=model_config, meta={})
        # carry the frozen groups through unchanged
        for name, arr in bundle.tensors.items():
            if name.startswith((GROUP_G + "/", GROUP_G_EMA + "/")):
                out.tensors[name] = arr
        out.put_state_dict(GROUP_D, disc.state_dict())
        out.put_state_dict(GROUP_I, inv.state_dict())
        out.put_state_dict(GROUP_I_EMA, ema_i.state_dict())
        _optimizer_to_bundle(out, "opt_i", inv, opt_i)
        _optimizer_to_bundle(out, "opt_d", disc, opt_d)
        out.meta.update(
            {
                "phase": "inversion",
                "step": cursor.step,
                "epoch": cursor.epoch,
                "batch_index": cursor.batch_index,
                "rng_hex": _rng_hex(z_rng),
                "train_config": config.to_dict(),
                "loss_config": loss_config.to_dict(),
            }
        )
        if out_dir is not None and tag is not None:
            save_bundle(out_dir / f"checkpoint_inversion_{tag}.tgb", out)
        return out

    while cursor.step < total_steps and cursor.epoch < config.epochs:
        order = dataset.epoch_order(config.seed + 1_000_003, cursor.epoch)
        chunks = [
            order[i : i + config.batch_size]
            for i in range(0, len(order), config.batch_size)
        ]
        while cursor.batch_index < len(chunks) and cursor.step < total_steps:
            batch = dataset.make_batch(chunks[cursor.batch_index])
            x_real, heat, mask = batch_to_tensors(batch)

            # --- inversion encoder step ---
            z_tilde = inv(x_real)
            x_hat = gen(z_tilde, heat)
            inv_l1 = inversion_reconstruction(x_real, x_hat)
            inv_total = loss_config.lambda_inv * inv_l1
            if loss_config.feature_matching:
                inv_total = inv_total + loss_config.lambda_fm * feature_matching(
                    disc, x_real, x_hat
                )
            opt_i.zero_grad()
            inv_total.backward()
            opt_i.step()
            ema_i.update(inv)

            record = {
                "phase": "inversion",
                "step": cursor.step + 1,
                "epoch": cursor.epoch,
                "inv_l1": inv_l1.item(),
                "inv_total": inv_total.item(),
                "d_adv": None,
                "d_rec_real": None,
                "d_rec_fake": None,
                "d_r1": None,
                "d_total": None,
            }

            # --- optional discriminator step against the reconstructions ---
            if config.train_d_in_inversion:
                s_real, hhat_real = disc(x_real)
                s_fake, hhat_fake = disc(x_hat.detach())
                d_adv = d_hinge_loss(s_real, s_fake)
                d_rec_real = masked_hinge_l1(heat, hhat_real, mask, eps)
                d_rec_fake = masked_hinge_l1(heat, hhat_fake, mask, eps)
                d_r1 = r1_gradient_penalty(disc, x_real, lam_gp)
                d_total = d_adv + lam_rec * (d_rec_real + d_rec_fake) + d_r1
                opt_d.zero_grad()
                d_total.backward()
                opt_d.step()
                record.update(
                    d_adv=d_adv.item(),
                    d_rec_real=d_rec_real.item(),
                    d_rec_fake=d_rec_fake.item(),
                    d_r1=d_r1.item(),
                    d_total=d_total.item(),
                )

            cursor.step += 1
            cursor.batch_index += 1
            _check_finite(cursor.step, record)
            if cursor.step % config.log_every == 0:
                history.append(record)
            if (
                config.checkpoint_every is not None
                and cursor.step % config.checkpoint_every == 0
            ):
                checkpoint(tag=f"{cursor.step:06d}")
        if cursor.batch_index >= len(chunks):
            cursor.epoch += 1
            cursor.batch_index = 0

    final = checkpoint(tag=None)
    history.close()
    return final, history.records
