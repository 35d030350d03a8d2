"""Hinge adversarial losses plus an L1 depth term.

Generator:      L_G = -lambda_gan * mean(D(fake)) + lambda_depth * |d_hat - d|_1
Discriminator:  L_D = -mean(min(0, -1 + D(real))) - mean(min(0, -1 - D(fake)))

D returns one logit map per tower; each loss is computed per tower on that
tower's own map and the scalar results are averaged, so towers with
different output resolutions carry equal weight.
"""

from __future__ import annotations

from typing import Sequence, Tuple, Union

import torch
from torch import Tensor

LAMBDA_GAN = 1.0
LAMBDA_DEPTH = 100.0

Logits = Union[Tensor, Sequence[Tensor]]


def _as_list(logits: Logits) -> Sequence[Tensor]:
    if isinstance(logits, Tensor):
        return [logits]
    return list(logits)


def generator_adversarial_loss(d_fake: Logits) -> Tensor:
    """-mean(D(fake)), averaged over towers."""
    maps = _as_list(d_fake)
    terms = [-m.mean() for m in maps]
    return torch.stack(terms).mean()


def depth_l1_loss(depth_pred: Tensor, depth_true: Tensor) -> Tensor:
    return (depth_pred - depth_true).abs().mean()


def generator_loss(d_fake: Logits, depth_pred: Tensor, depth_true: Tensor,
                   lambda_gan: float = LAMBDA_GAN,
                   lambda_depth: float = LAMBDA_DEPTH) -> Tensor:
    return (lambda_gan * generator_adversarial_loss(d_fake)
            + lambda_depth * depth_l1_loss(depth_pred, depth_true))


def discriminator_loss(d_real: Logits, d_fake: Logits) -> Tensor:
    """Hinge loss, per tower, tower scalars averaged."""
    real_maps = _as_list(d_real)
    fake_maps = _as_list(d_fake)
    if len(real_maps) != len(fake_maps):
        raise ValueError("real and fake logit lists differ in length")
    terms = []
    for real, fake in zip(real_maps, fake_maps):
        real_term = -torch.clamp(-1.0 + real, max=0.0).mean()
        fake_term = -torch.clamp(-1.0 - fake, max=0.0).mean()
        terms.append(real_term + fake_term)
    return torch.stack(terms).mean()


def losses(gen_out: Tuple[Tensor, Tensor], real: Tuple[Tensor, Tensor],
           d_logits_fake: Logits, d_logits_real: Logits,
           lambda_gan: float = LAMBDA_GAN,
           lambda_depth: float = LAMBDA_DEPTH) -> Tuple[Tensor, Tensor]:
    """Both objectives at once; returns (generator loss, discriminator loss).

    gen_out and real are (rgb, depth) pairs; rgb enters only through the
    discriminator logits, depth also through the L1 term.
    """
    _, depth_pred = gen_out
    _, depth_true = real
    loss_g = generator_loss(d_logits_fake, depth_pred, depth_true,
                            lambda_gan, lambda_depth)
    loss_d = discriminator_loss(d_logits_real, d_logits_fake)
    return loss_g, loss_d
