"""Generator/discriminator pair and layer primitives (torch backed)."""

from .layers import (
    SNConv2d,
    SNConvTranspose2d,
    SNPartialConv2d,
    avg_pool_3x3_stride2,
    conv2d,
    ema_update,
    leaky_relu,
    partial_conv2d,
    spectral_normalize,
    transposed_conv2d,
)
from .generator import Generator, GeneratorConfig, guidance_to_tensors
from .discriminator import Discriminator, DiscriminatorConfig, combined_logits
from .losses import discriminator_loss, generator_loss, losses
from .training import NumericalError, TrainConfig, Trainer, TrainingPair
from .checkpoint import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint

__all__ = [
    "SNConv2d",
    "SNConvTranspose2d",
    "SNPartialConv2d",
    "avg_pool_3x3_stride2",
    "conv2d",
    "ema_update",
    "leaky_relu",
    "partial_conv2d",
    "spectral_normalize",
    "transposed_conv2d",
    "Generator",
    "GeneratorConfig",
    "guidance_to_tensors",
    "Discriminator",
    "DiscriminatorConfig",
    "combined_logits",
    "discriminator_loss",
    "generator_loss",
    "losses",
    "NumericalError",
    "TrainConfig",
    "Trainer",
    "TrainingPair",
    "CHECKPOINT_VERSION",
    "load_checkpoint",
    "save_checkpoint",
]
