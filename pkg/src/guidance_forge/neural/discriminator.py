"""Two-tower patch discriminator over 4-channel RGB-D images.

Both towers share one architecture: a stack of 4x4 spectral-normalized
convolutions (five stride-2, then two stride-1), instance normalization
everywhere except the first and last layer, LeakyReLU 0.2.  The first tower
sees the input at full resolution; the second sees it after a 3x3 stride-2
average pool, so its patches cover twice the area.  Each tower ends in a
1-channel logit map; losses are computed per tower and averaged.

Depth should be normalized to roughly [0, 1] (divide by the scene depth cap)
before being stacked with rgb; the trainer does this for real and generated
inputs alike.
"""

from __future__ import annotations

import dataclasses
from typing import List, Tuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .layers import LEAKY_SLOPE, SNConv2d, avg_pool_3x3_stride2


@dataclasses.dataclass(frozen=True)
class DiscriminatorConfig:
    in_channels: int = 4
    base_width: int = 32  # full-scale runs use 128
    stride2_layers: int = 5

    def __post_init__(self):
        if self.base_width < 1:
            raise ValueError("base_width must be >= 1")
        if self.stride2_layers < 1:
            raise ValueError("stride2_layers must be >= 1")


class _SpatialInstanceNorm(nn.Module):
    """InstanceNorm2d that passes 1x1 maps through unchanged.

    Normalizing a single spatial element would always yield zero (torch
    refuses it outright in training mode); small desk-scale inputs reach
    1x1 in the deepest layers of the pooled tower.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.InstanceNorm2d(channels, affine=False)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[2] * x.shape[3] <= 1:
            return x
        return self.norm(x)


class _PadConv(nn.Module):
    """4x4 SN conv; stride 1 uses asymmetric (1,2) padding to keep size."""

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.stride = stride
        pad = 1 if stride == 2 else 0
        self.conv = SNConv2d(in_channels, out_channels, 4, stride=stride,
                             padding=pad)

    def forward(self, x: Tensor) -> Tensor:
        if self.stride == 1:
            x = F.pad(x, (1, 2, 1, 2))
        return self.conv(x)


class _Tower(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        b = cfg.base_width
        widths = ([b, 2 * b] + [4 * b] * max(0, cfg.stride2_layers - 2))
        widths = widths[:cfg.stride2_layers]
        layers: List[nn.Module] = []
        norms: List[nn.Module] = []
        in_ch = cfg.in_channels
        for i, width in enumerate(widths):
            layers.append(_PadConv(in_ch, width, stride=2))
            # no normalization on the first layer
            norms.append(nn.Identity() if i == 0 else
                         _SpatialInstanceNorm(width))
            in_ch = width
        layers.append(_PadConv(in_ch, in_ch, stride=1))
        norms.append(_SpatialInstanceNorm(in_ch))
        self.layers = nn.ModuleList(layers)
        self.norms = nn.ModuleList(norms)
        self.out = _PadConv(in_ch, 1, stride=1)

    def forward(self, x: Tensor) -> Tensor:
        for conv, norm in zip(self.layers, self.norms):
            x = F.leaky_relu(norm(conv(x)), LEAKY_SLOPE)
        return self.out(x)


class Discriminator(nn.Module):
    """Returns one logit map per tower: [full-res map, pooled-input map]."""

    def __init__(self, config: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.config = config
        self.tower_full = _Tower(config)
        self.tower_pooled = _Tower(config)

    def forward(self, rgbd: Tensor) -> List[Tensor]:
        if rgbd.shape[1] != self.config.in_channels:
            raise ValueError(f"expected {self.config.in_channels} channels, "
                             f"got {rgbd.shape[1]}")
        out_full = self.tower_full(rgbd)
        out_pooled = self.tower_pooled(avg_pool_3x3_stride2(rgbd))
        return [out_full, out_pooled]


def combined_logits(outputs: List[Tensor]) -> Tensor:
    """(out1 + out2) / 2 where the coarser map broadcasts over the finer.

    Only exact shape matches or 1x1 coarse maps are supported; anything else
    is ambiguous and raises.
    """
    a, b = outputs
    if a.shape[2:] != b.shape[2:] and tuple(b.shape[2:]) != (1, 1):
        raise ValueError(f"cannot combine logit maps of shapes "
                         f"{tuple(a.shape)} and {tuple(b.shape)}")
    return (a + b) / 2.0
