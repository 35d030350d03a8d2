"""Adversarial training loop for the completion generator.

Each call to `Trainer.train_step` runs, in order: one generator forward on
the (optionally re-masked) guidance batch, `discriminator_steps` updates of
the discriminator against the detached fakes, one generator update, then one
EMA shadow update.  Optimizers are Adam with betas (0.5, 0.999) and the
discriminator learning rate four times the generator's.

Any non-finite loss raises NumericalError before weights are touched.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
from torch import Tensor

from ..errors import NumericalError
from ..masking import RECTANGLES, random_mask
from ..pointcloud import GuidanceImage
from .discriminator import Discriminator
from .generator import Generator, guidance_to_tensors
from .losses import (depth_l1_loss, discriminator_loss,
                     generator_adversarial_loss)


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    lr_generator: float = 1e-4
    lr_discriminator: float = 4e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    discriminator_steps: int = 2
    lambda_gan: float = 1.0
    lambda_depth: float = 100.0
    batch_size: int = 1
    apply_masks: bool = True
    mask_max_fraction: float = 0.75
    mask_mode: str = RECTANGLES

    def __post_init__(self):
        if self.discriminator_steps < 1:
            raise ValueError("discriminator_steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclasses.dataclass(frozen=True)
class TrainingPair:
    """One supervised example: sparse guidance plus its dense target."""

    guidance: GuidanceImage
    target_rgb: np.ndarray    # (H, W, 3) in [0, 1]
    target_depth: np.ndarray  # (H, W) meters

    def __post_init__(self):
        h, w = self.guidance.depth.shape
        if self.target_rgb.shape != (h, w, 3):
            raise ValueError("target_rgb shape does not match guidance")
        if self.target_depth.shape != (h, w):
            raise ValueError("target_depth shape does not match guidance")


def _check_finite(value: Tensor, what: str) -> None:
    if not bool(torch.isfinite(value).all()):
        raise NumericalError(f"{what} is not finite: {value}")


class Trainer:
    def __init__(self, generator: Generator, discriminator: Discriminator,
                 config: TrainConfig = TrainConfig(), seed: int = 0):
        self.generator = generator
        self.discriminator = discriminator
        self.config = config
        self.seed = seed
        self.step_count = 0
        betas = (config.beta1, config.beta2)
        self.opt_g = torch.optim.Adam(generator.parameters(),
                                      lr=config.lr_generator, betas=betas,
                                      eps=config.adam_eps)
        self.opt_d = torch.optim.Adam(discriminator.parameters(),
                                      lr=config.lr_discriminator, betas=betas,
                                      eps=config.adam_eps)

    def _batch_tensors(self, batch: Sequence[TrainingPair]):
        cfg = self.config
        depth_max = self.generator.config.depth_max
        dtype = next(self.generator.parameters()).dtype
        xs, masks, rgbs, depths = [], [], [], []
        for i, pair in enumerate(batch):
            guidance = pair.guidance
            if cfg.apply_masks:
                guidance = random_mask(
                    guidance,
                    rng_seed=[self.seed, self.step_count, i],
                    max_fraction=cfg.mask_max_fraction,
                    mode=cfg.mask_mode)
            x, m = guidance_to_tensors(guidance, depth_max, dtype=dtype)
            xs.append(x)
            masks.append(m)
            # np.array: targets are frozen (non-writable) arrays; torch wants
            # a writable buffer
            rgbs.append(torch.as_tensor(
                np.array(np.transpose(pair.target_rgb, (2, 0, 1))[None]),
                dtype=dtype))
            depths.append(torch.as_tensor(
                np.array(pair.target_depth[None, None]), dtype=dtype))
        return (torch.cat(xs), torch.cat(masks),
                torch.cat(rgbs), torch.cat(depths))

    def train_step(self, batch: Sequence[TrainingPair]) -> Dict[str, float]:
        """One full optimization step; returns scalar diagnostics."""
        cfg = self.config
        gen, disc = self.generator, self.discriminator
        gen.train()
        disc.train()
        depth_max = gen.config.depth_max

        x, mask, real_rgb, real_depth = self._batch_tensors(batch)
        fake_rgb, fake_depth = gen(x, mask)
        _check_finite(fake_depth.sum() + fake_rgb.sum(), "generator output")

        real_in = torch.cat([real_rgb, real_depth / depth_max], dim=1)
        fake_in = torch.cat([fake_rgb, fake_depth / depth_max], dim=1)

        loss_d_value = 0.0
        for _ in range(cfg.discriminator_steps):
            d_real = disc(real_in)
            d_fake = disc(fake_in.detach())
            loss_d = discriminator_loss(d_real, d_fake)
            _check_finite(loss_d, "discriminator loss")
            self.opt_d.zero_grad(set_to_none=True)
            loss_d.backward()
            self.opt_d.step()
            loss_d_value = float(loss_d.detach())

        d_fake_live = disc(fake_in)
        adv = generator_adversarial_loss(d_fake_live)
        l1 = depth_l1_loss(fake_depth, real_depth)
        loss_g = cfg.lambda_gan * adv + cfg.lambda_depth * l1
        _check_finite(loss_g, "generator loss")
        self.opt_g.zero_grad(set_to_none=True)
        loss_g.backward()
        self.opt_g.step()
        gen.update_ema()

        self.step_count += 1
        return {
            "step": float(self.step_count),
            "loss_g": float(loss_g.detach()),
            "loss_d": loss_d_value,
            "adv_g": float(adv.detach()),
            "depth_l1": float(l1.detach()),
        }

    def fit(self, pairs: Sequence[TrainingPair], steps: int,
            log_every: Optional[int] = None) -> List[Dict[str, float]]:
        """Round-robin over pairs for a fixed number of steps."""
        if not pairs:
            raise ValueError("no training pairs given")
        history = []
        cursor = 0
        for _ in range(steps):
            batch = []
            for _ in range(self.config.batch_size):
                batch.append(pairs[cursor % len(pairs)])
                cursor += 1
            record = self.train_step(batch)
            history.append(record)
            if log_every and self.step_count % log_every == 0:
                print(f"step {self.step_count}: "
                      f"loss_g={record['loss_g']:.4f} "
                      f"loss_d={record['loss_d']:.4f} "
                      f"depth_l1={record['depth_l1']:.4f}")
        return history
