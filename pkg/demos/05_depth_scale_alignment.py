"""
Scale-aligning monocular depth against sparse metric samples
============================================================

Monocular depth predictors are right up to an unknown scale.  Given a
sparse metric reference (here: a reprojected point cloud; in the wild:
SfM points or a depth sensor), a closed-form least squares fit recovers
the scale, optionally with a shift term.
"""

import numpy as np

from guidance_forge import align_scale, coverage_filter, pair_selector
from guidance_forge.synthetic import ring_trajectory

rng = np.random.default_rng(2)

# "monocular" depth: smooth field in arbitrary units
dense = rng.uniform(1.0, 5.0, size=(64, 64))

# sparse metric truth at 30% of pixels: the same geometry at 2.4x scale,
# observed with 5 mm noise
true_scale = 2.4
valid = rng.uniform(size=dense.shape) < 0.3
sparse = true_scale * dense + rng.normal(0.0, 0.005, size=dense.shape)
sparse[~valid] = 0.0

scale, aligned = align_scale(dense, sparse, valid)
print(f"planted scale {true_scale}, recovered {scale:.5f} "
      f"({abs(scale - true_scale) / true_scale:.2e} rel err)")

resid = np.abs(aligned - sparse)[valid]
print(f"residual on sparse pixels: mean {resid.mean()*1000:.2f} mm")

# an affine sensor (scale and offset) needs the two-parameter fit
sparse_affine = np.where(valid, true_scale * dense - 0.7, 0.0)
(s, b), _ = align_scale(dense, sparse_affine, valid, with_shift=True)
print(f"affine fit: scale {s:.5f}, shift {b:+.5f} (planted 2.4, -0.7)")

# guardrails used when harvesting training pairs from a trajectory:
# skip frames whose sparse coverage is too thin to trust
thin = valid & (rng.uniform(size=valid.shape) < 0.1)
print(f"coverage_filter: {valid.mean():.0%} valid -> "
      f"{coverage_filter(valid)}, {thin.mean():.0%} valid -> "
      f"{coverage_filter(thin)}")

# and keep only pose pairs with a useful amount of parallax
poses = ring_trajectory(12, radius=2.0)
pairs = pair_selector(poses, max_dist=1.5)
print(f"pair_selector kept {len(pairs)} of {12 * 11 // 2} candidate pairs, "
      f"e.g. {pairs[:4]}")
