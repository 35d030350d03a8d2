"""Random masking of guidance validity, the training-time augmentation.

A target fraction f ~ U(0, max_fraction) of the full image area is
knocked out by axis-aligned rectangles until the masked share reaches f.
Masking is joint across rgb, depth, and validity: a pixel is either
fully present or fully absent, matching the sparsity structure that
reprojection produces. Pure function of (input, seed); freely parallel.
"""

from __future__ import annotations

import numpy as np

from .pointcloud import GuidanceImage

RECTANGLES = "rectangles"
PIXELS = "pixels"

_MAX_RECTANGLES = 10_000
# Hard ceiling on the masked share. A single rectangle can cover up to a
# quarter of the image, so the stop-at-target loop alone could overshoot
# far past max_fraction; rectangles that would cross this cap are
# redrawn instead of applied.
_HARD_CAP = 0.80


def random_mask(guidance: GuidanceImage, rng_seed: int,
                max_fraction: float = 0.75, mode: str = RECTANGLES) -> GuidanceImage:
    """Zero out a randomly chosen share of the guidance image.

    Rectangle sides are drawn from U(H/8, H/2) x U(W/8, W/2) and placed
    uniformly inside the image; rectangles accumulate until the masked
    share of the full image area reaches the target fraction. Mode
    "pixels" instead knocks out individual pixels chosen without
    replacement. Unmasked pixels are bit-identical to the input, and the
    same seed always produces the same output.
    """
    if not 0.0 <= max_fraction <= 1.0:
        raise ValueError("max_fraction must lie in [0, 1]")
    if mode not in (RECTANGLES, PIXELS):
        raise ValueError(f"unknown mask mode {mode!r}")
    h, w = guidance.valid.shape
    rng = np.random.default_rng(rng_seed)
    target = rng.uniform(0.0, max_fraction)
    masked = np.zeros((h, w), dtype=bool)
    if mode == RECTANGLES:
        cap_count = int(np.floor(_HARD_CAP * h * w))
        masked_count = 0
        for _ in range(_MAX_RECTANGLES):
            if masked_count >= target * h * w:
                break
            rh = max(1, int(round(rng.uniform(h / 8.0, h / 2.0))))
            rw = max(1, int(round(rng.uniform(w / 8.0, w / 2.0))))
            top = int(rng.integers(0, h - rh + 1))
            left = int(rng.integers(0, w - rw + 1))
            block = masked[top:top + rh, left:left + rw]
            grown = masked_count + int(rh * rw - np.count_nonzero(block))
            if grown > cap_count:
                continue
            block[:] = True
            masked_count = grown
    else:
        count = int(np.ceil(target * h * w))
        if count:
            flat = rng.choice(h * w, size=count, replace=False)
            masked.reshape(-1)[flat] = True

    rgb = guidance.rgb.copy()
    depth = guidance.depth.copy()
    valid = guidance.valid.copy()
    rgb[masked] = 0.0
    depth[masked] = 0.0
    valid[masked] = False
    return GuidanceImage(rgb, depth, valid)
