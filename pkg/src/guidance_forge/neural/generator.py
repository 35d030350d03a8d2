"""Completion generator: partial-conv encoder, conv bottleneck, two decoders.

The input is a sparse RGB-D guidance image packed as 4 channels (rgb, then
depth / depth_max) plus a validity mask.  The encoder is built from
mask-renormalized partial convolutions so unobserved pixels contribute
nothing; the bottleneck and the two task decoders (one for color, one for
depth) use standard spectral-normalized convolutions.  Decoders receive
encoder features through additive skip connections.  Every convolution
weight is spectral normalized.

The module keeps an exponential-moving-average shadow of all its parameters
(decay 0.999, updated once per generator optimizer step).  `predict` runs an
eval-mode forward through the shadow weights; `forward` always uses the live
parameters so training and gradient checks see the optimized function.
"""

from __future__ import annotations

import dataclasses
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from ..pointcloud import GuidanceImage
from .layers import LEAKY_SLOPE, SNConv2d, SNConvTranspose2d, SNPartialConv2d, ema_update

DOWNSAMPLE_FACTOR = 32  # stride-2 stem plus four stride-2 stages


@dataclasses.dataclass(frozen=True)
class GeneratorConfig:
    """Width/depth knobs.  Defaults give a small CPU-friendly model."""

    in_channels: int = 4
    stage_widths: Tuple[int, int, int, int] = (8, 16, 32, 64)
    stage_depths: Tuple[int, int, int, int] = (1, 1, 1, 1)
    bottleneck_depth: int = 4
    head_width: int = 0  # 0 means stage_widths[0]
    head_depth: int = 2
    depth_max: float = 20.0
    ema_decay: float = 0.999

    def __post_init__(self):
        if len(self.stage_widths) != 4 or len(self.stage_depths) != 4:
            raise ValueError("exactly four encoder stages are required")
        if self.bottleneck_depth < 1:
            raise ValueError("bottleneck_depth must be >= 1")
        if self.head_depth < 0:
            raise ValueError("head_depth must be >= 0")
        if self.depth_max <= 0:
            raise ValueError("depth_max must be positive")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must be in [0, 1)")

    @property
    def resolved_head_width(self) -> int:
        return self.head_width if self.head_width > 0 else self.stage_widths[0]


class _SpatialBatchNorm(nn.BatchNorm2d):
    """BatchNorm2d that passes single-element maps through unchanged.

    With batch 1 and a 1x1 map there is nothing to normalize over (torch
    raises outright in training mode); small inputs reach 1x1 at the
    bottleneck, e.g. 32x32 with the x32 downsample.
    """

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[0] * x.shape[2] * x.shape[3] <= 1:
            return x
        return super().forward(x)


class _EncoderBlock(nn.Module):
    """Residual block of partial convolutions; downsamples when stride=2."""

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv1 = SNPartialConv2d(in_channels, out_channels, 3,
                                     stride=stride, padding=1)
        self.norm1 = _SpatialBatchNorm(out_channels)
        self.conv2 = SNPartialConv2d(out_channels, out_channels, 3,
                                     stride=1, padding=1)
        self.norm2 = _SpatialBatchNorm(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.project = SNPartialConv2d(in_channels, out_channels, 1,
                                           stride=stride, padding=0,
                                           bias=False)
        else:
            self.project = None

    def forward(self, x: Tensor, mask: Tensor) -> Tuple[Tensor, Tensor]:
        y, m = self.conv1(x, mask)
        y = F.leaky_relu(self.norm1(y), LEAKY_SLOPE)
        y, m = self.conv2(y, m)
        y = self.norm2(y)
        if self.project is not None:
            shortcut, _ = self.project(x, mask)
        else:
            shortcut = x
        return F.leaky_relu(y + shortcut, LEAKY_SLOPE), m


class _BottleneckBlock(nn.Module):
    """Pre-norm conv block: BatchNorm -> 3x3 conv -> LeakyReLU (optional)."""

    def __init__(self, in_channels: int, out_channels: int, activate: bool):
        super().__init__()
        self.norm = _SpatialBatchNorm(in_channels)
        self.conv = SNConv2d(in_channels, out_channels, 3, stride=1, padding=1)
        self.activate = activate

    def forward(self, x: Tensor) -> Tensor:
        y = self.conv(self.norm(x))
        return F.leaky_relu(y, LEAKY_SLOPE) if self.activate else y


class _UpBlock(nn.Module):
    """Stride-2 transposed conv that exactly doubles spatial size."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.up = SNConvTranspose2d(in_channels, out_channels, 3, stride=2,
                                    padding=1, output_padding=1)
        self.norm = _SpatialBatchNorm(out_channels)

    def forward(self, x: Tensor, skip: Optional[Tensor]) -> Tensor:
        y = F.leaky_relu(self.norm(self.up(x)), LEAKY_SLOPE)
        if skip is not None:
            y = y + skip
        return y


class _Decoder(nn.Module):
    """Mirror of the encoder ending in a single-task output head."""

    def __init__(self, cfg: GeneratorConfig, out_channels: int):
        super().__init__()
        w = cfg.stage_widths
        head = cfg.resolved_head_width
        self.ups = nn.ModuleList([
            _UpBlock(w[3], w[2]),
            _UpBlock(w[2], w[1]),
            _UpBlock(w[1], w[0]),
            _UpBlock(w[0], w[0]),
            _UpBlock(w[0], head),
        ])
        blocks: List[nn.Module] = []
        for _ in range(cfg.head_depth):
            blocks.append(_BottleneckBlock(head, head, activate=True))
        self.head = nn.ModuleList(blocks)
        self.out_norm = _SpatialBatchNorm(head)
        self.out_conv = SNConv2d(head, out_channels, 3, stride=1, padding=1)

    def forward(self, h: Tensor, taps: Sequence[Tensor]) -> Tensor:
        # taps ordered coarse to fine: /16, /8, /4, /2, then None at full res
        skips: List[Optional[Tensor]] = list(taps) + [None]
        for up, skip in zip(self.ups, skips):
            h = up(h, skip)
        for block in self.head:
            h = block(h)
        return self.out_conv(self.out_norm(h))


class Generator(nn.Module):
    """RGB-D completion network with an EMA shadow of its parameters."""

    def __init__(self, config: GeneratorConfig = GeneratorConfig()):
        super().__init__()
        self.config = config
        w = config.stage_widths

        self.stem = SNPartialConv2d(config.in_channels, w[0], 3, stride=2,
                                    padding=1)
        self.stem_norm = _SpatialBatchNorm(w[0])

        stages: List[nn.Module] = []
        in_ch = w[0]
        for width, depth in zip(w, config.stage_depths):
            blocks = [_EncoderBlock(in_ch, width, stride=2)]
            for _ in range(depth - 1):
                blocks.append(_EncoderBlock(width, width, stride=1))
            stages.append(nn.ModuleList(blocks))
            in_ch = width
        self.stages = nn.ModuleList(stages)

        bottleneck: List[nn.Module] = []
        depth = config.bottleneck_depth
        ch = w[3]
        for j in range(depth):
            out_ch = 2 * w[3] if (j == 1 and depth >= 3) else w[3]
            bottleneck.append(_BottleneckBlock(ch, out_ch,
                                               activate=(j < depth - 1)))
            ch = out_ch
        self.bottleneck = nn.ModuleList(bottleneck)

        self.rgb_decoder = _Decoder(config, out_channels=3)
        self.depth_decoder = _Decoder(config, out_channels=1)

        self._ema_names: List[Tuple[str, str]] = []
        for name, param in self.named_parameters():
            buf_name = "ema__" + name.replace(".", "__")
            self.register_buffer(buf_name, param.detach().clone())
            self._ema_names.append((name, buf_name))

    def forward(self, x: Tensor, mask: Tensor) -> Tuple[Tensor, Tensor]:
        """Live-parameter forward.  x: (N,4,H,W), mask: (N,1,H,W).

        Returns (rgb in [0,1] as (N,3,H,W), depth in meters as (N,1,H,W)).
        """
        if x.shape[2] % DOWNSAMPLE_FACTOR or x.shape[3] % DOWNSAMPLE_FACTOR:
            raise ValueError(f"spatial size {tuple(x.shape[2:])} must be a "
                             f"multiple of {DOWNSAMPLE_FACTOR}")
        h, m = self.stem(x, mask)
        h = F.leaky_relu(self.stem_norm(h), LEAKY_SLOPE)
        taps = [h]  # /2
        for stage in self.stages:
            for block in stage:
                h, m = block(h, m)
            taps.append(h)  # /4, /8, /16, /32
        # the /32 output feeds the bottleneck, not a skip connection
        skips = taps[:-1][::-1]  # /16, /8, /4, /2
        for block in self.bottleneck:
            h = block(h)
        rgb = torch.sigmoid(self.rgb_decoder(h, skips))
        depth = F.softplus(self.depth_decoder(h, skips))
        return rgb, depth

    # --- EMA machinery ---

    def ema_state(self) -> "dict[str, Tensor]":
        return {name: getattr(self, buf) for name, buf in self._ema_names}

    def update_ema(self) -> None:
        """One shadow step: shadow <- decay*shadow + (1-decay)*param."""
        decay = self.config.ema_decay
        with torch.no_grad():
            for name, buf in self._ema_names:
                param = self.get_parameter(name)
                ema_update(getattr(self, buf), param, decay)

    def reset_ema(self) -> None:
        """Snap every shadow back to the current live parameter values."""
        with torch.no_grad():
            for name, buf in self._ema_names:
                getattr(self, buf).copy_(self.get_parameter(name))

    def forward_ema(self, x: Tensor, mask: Tensor) -> Tuple[Tensor, Tensor]:
        """Forward pass through the EMA shadow weights."""
        overrides = {name: getattr(self, buf) for name, buf in self._ema_names}
        return torch.func.functional_call(self, overrides, (x, mask))

    def predict(self, guidance: GuidanceImage) -> Tuple[np.ndarray, np.ndarray]:
        """Complete a guidance image.  Eval mode, EMA weights, no grad.

        Returns (rgb (H,W,3) float in [0,1], depth (H,W) meters) as numpy
        arrays in float64.
        """
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                x, mask = guidance_to_tensors(guidance, self.config.depth_max,
                                              dtype=self._param_dtype(),
                                              device=self._param_device())
                rgb, depth = self.forward_ema(x, mask)
        finally:
            self.train(was_training)
        rgb_np = rgb[0].permute(1, 2, 0).cpu().numpy().astype(np.float64)
        depth_np = depth[0, 0].cpu().numpy().astype(np.float64)
        return np.clip(rgb_np, 0.0, 1.0), depth_np

    def _param_dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def _param_device(self) -> torch.device:
        return next(self.parameters()).device


def guidance_to_tensors(guidance: GuidanceImage, depth_max: float,
                        dtype: torch.dtype = torch.float32,
                        device: "torch.device | str" = "cpu"
                        ) -> Tuple[Tensor, Tensor]:
    """Pack a guidance image into (x: (1,4,H,W), mask: (1,1,H,W)) tensors.

    Channels are r, g, b, depth / depth_max; invalid pixels are zero in all
    channels (GuidanceImage already guarantees that).
    """
    rgb = np.transpose(guidance.rgb, (2, 0, 1))
    depth = (guidance.depth / depth_max)[None, :, :]
    # np.concatenate/astype produce fresh writable buffers for torch
    x = np.concatenate([rgb, depth], axis=0)[None]
    mask = guidance.valid.astype(np.float64)[None, None]
    return (torch.as_tensor(x, dtype=dtype, device=device),
            torch.as_tensor(mask, dtype=dtype, device=device))


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
