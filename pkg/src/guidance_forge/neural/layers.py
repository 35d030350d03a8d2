"""Layer primitives: partial convolutions, spectral normalization, small ops.

All tensors are NCHW float tensors.  Masks are single-channel (N, 1, H, W)
tensors holding 0.0 or 1.0; a pixel is valid iff its mask value is 1.

Partial convolutions follow the mask-renormalized definition of Liu et al.:
for each output window, y = W^T (x * m) * (K / sum(m)) + b when the window
contains at least one valid input pixel (K is the window element count
kh * kw), and y = 0 with output mask 0 otherwise.  The mask is zero-padded,
so with padding > 0 the border windows renormalize even under a full mask;
equality with a standard convolution therefore holds exactly on windows that
lie fully inside the image (always, when padding = 0).
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import torch
import torch.nn.functional as F
from torch import Tensor, nn

LEAKY_SLOPE = 0.2
_SN_EPS = 1e-12


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Standard cross-correlation convolution (thin functional wrapper)."""
    return F.conv2d(x, weight, bias, stride=stride, padding=padding)


def transposed_conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
                      stride: int = 1, padding: int = 0,
                      output_padding: int = 0) -> Tensor:
    """Transposed convolution: the gradient of conv2d with respect to input.

    weight has shape (in_channels, out_channels, kh, kw), torch convention.
    """
    return F.conv_transpose2d(x, weight, bias, stride=stride, padding=padding,
                              output_padding=output_padding)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    return F.leaky_relu(x, negative_slope=slope)


def avg_pool_3x3_stride2(x: Tensor) -> Tensor:
    """3x3 stride-2 average pool, zero pad 1, pad excluded from the mean."""
    return F.avg_pool2d(x, kernel_size=3, stride=2, padding=1,
                        count_include_pad=False)


def partial_conv2d(x: Tensor, mask: Tensor, weight: Tensor,
                   bias: Optional[Tensor] = None, stride: int = 1,
                   padding: int = 0) -> Tuple[Tensor, Tensor]:
    """Mask-renormalized convolution.  Returns (features, updated mask).

    x: (N, C, H, W); mask: (N, 1, H, W) of {0, 1}.  Invalid input pixels are
    zeroed before the convolution; each output is rescaled by K / sum(mask)
    over its window so partially observed windows are not dimmed.  Windows
    with no valid pixel produce 0 (no bias) and an output mask of 0.
    """
    if mask.shape[1] != 1 or mask.shape[0] != x.shape[0] or mask.shape[2:] != x.shape[2:]:
        raise ValueError(f"mask shape {tuple(mask.shape)} does not match input "
                         f"{tuple(x.shape)}")
    kh, kw = weight.shape[2], weight.shape[3]
    window = float(kh * kw)
    ones = torch.ones(1, 1, kh, kw, dtype=x.dtype, device=x.device)
    with torch.no_grad():
        mask_sum = F.conv2d(mask, ones, stride=stride, padding=padding)
        hole = mask_sum <= 0.0
        scale = window / mask_sum.clamp(min=1.0)
        scale = torch.where(hole, torch.zeros_like(scale), scale)
        mask_out = (~hole).to(x.dtype)
    y = F.conv2d(x * mask, weight, None, stride=stride, padding=padding)
    y = y * scale
    if bias is not None:
        y = y + bias.view(1, -1, 1, 1) * mask_out
    return y, mask_out


def spectral_normalize(weight: Tensor, u: Tensor,
                       eps: float = _SN_EPS) -> Tuple[Tensor, Tensor]:
    """One power-iteration step; returns (weight / sigma_hat, updated u).

    The weight is viewed as a matrix with its leading dimension as rows.
    sigma_hat = u_next^T W v estimates the largest singular value; it is
    clamped at eps so a zero weight maps to zero instead of NaN.
    """
    w = weight.reshape(weight.shape[0], -1)
    with torch.no_grad():
        v = F.normalize(w.t().mv(u), dim=0, eps=eps)
        u_next = F.normalize(w.mv(v), dim=0, eps=eps)
    sigma = torch.dot(u_next, w.mv(v))
    w_hat = weight / sigma.clamp(min=eps)
    return w_hat, u_next


def ema_update(shadow: Tensor, live: Tensor, decay: float = 0.999) -> Tensor:
    """shadow <- decay * shadow + (1 - decay) * live, in place."""
    shadow.mul_(decay).add_(live, alpha=1.0 - decay)
    return shadow


class _SpectralWeight(nn.Module):
    """Holds a raw weight parameter plus the power-iteration vectors.

    In training mode each call advances u and v by one power-iteration step
    (under no_grad); the returned normalized weight W / sigma is always part
    of the autograd graph through W, with u and v treated as constants.  In
    eval mode u and v are frozen, so repeated forwards are reproducible and
    finite-difference checks see a fixed function of W.
    """

    def __init__(self, shape: Tuple[int, ...]):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(*shape))
        rows = shape[0]
        cols = 1
        for s in shape[1:]:
            cols *= s
        nn.init.kaiming_uniform_(self.weight, a=math.sqrt(5))
        with torch.no_grad():
            u = F.normalize(torch.randn(rows), dim=0, eps=_SN_EPS)
            w = self.weight.reshape(rows, cols)
            v = F.normalize(w.t().mv(u), dim=0, eps=_SN_EPS)
        self.register_buffer("u", u)
        self.register_buffer("v", v)

    def normalized(self, training: bool) -> Tensor:
        w = self.weight.reshape(self.weight.shape[0], -1)
        if training:
            with torch.no_grad():
                self.v.copy_(F.normalize(w.t().mv(self.u), dim=0, eps=_SN_EPS))
                self.u.copy_(F.normalize(w.mv(self.v), dim=0, eps=_SN_EPS))
        # clone: the graph must hold a snapshot, not the live buffers, or a
        # later forward's in-place update breaks this one's backward
        u = self.u.clone()
        v = self.v.clone()
        sigma = torch.dot(u, w.mv(v))
        return self.weight / sigma.clamp(min=_SN_EPS)


class SNConv2d(nn.Module):
    """Convolution whose weight is divided by its estimated spectral norm."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, bias: bool = True):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.sn = _SpectralWeight((out_channels, in_channels,
                                   kernel_size, kernel_size))
        if bias:
            self.bias = nn.Parameter(torch.zeros(out_channels))
        else:
            self.register_parameter("bias", None)

    def forward(self, x: Tensor) -> Tensor:
        w = self.sn.normalized(self.training)
        return F.conv2d(x, w, self.bias, stride=self.stride,
                        padding=self.padding)


class SNConvTranspose2d(nn.Module):
    """Transposed convolution with spectral-normalized weight."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, output_padding: int = 0,
                 bias: bool = True):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding
        self.sn = _SpectralWeight((in_channels, out_channels,
                                   kernel_size, kernel_size))
        if bias:
            self.bias = nn.Parameter(torch.zeros(out_channels))
        else:
            self.register_parameter("bias", None)

    def forward(self, x: Tensor) -> Tensor:
        w = self.sn.normalized(self.training)
        return F.conv_transpose2d(x, w, self.bias, stride=self.stride,
                                  padding=self.padding,
                                  output_padding=self.output_padding)


class SNPartialConv2d(nn.Module):
    """Partial convolution with spectral-normalized weight.

    forward(x, mask) -> (features, updated mask).
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, bias: bool = True):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.sn = _SpectralWeight((out_channels, in_channels,
                                   kernel_size, kernel_size))
        if bias:
            self.bias = nn.Parameter(torch.zeros(out_channels))
        else:
            self.register_parameter("bias", None)

    def forward(self, x: Tensor, mask: Tensor) -> Tuple[Tensor, Tensor]:
        w = self.sn.normalized(self.training)
        return partial_conv2d(x, mask, w, self.bias, stride=self.stride,
                              padding=self.padding)
