"""Scale alignment of relative depth to sparse metric depth, plus the
coverage and pose-pair filters used when assembling training data.

A monocular depth map is only defined up to scale.  Given sparse metric
depth at some pixels, the least-squares scale for `s * dense ~ sparse` over
the valid set has the closed form s = sum(dense*sparse) / sum(dense^2); no
iteration, no shift term.  A two-parameter affine fit (scale and shift) is
available behind `with_shift` for experimentation and is off by default.
"""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

import numpy as np

from .geometry import Pose


def align_scale(dense: np.ndarray, sparse: np.ndarray,
                sparse_valid: np.ndarray,
                with_shift: bool = False) -> Tuple[float, np.ndarray]:
    """Fit sparse = s * dense over valid pixels; return (s, s * dense).

    dense must be strictly positive wherever sparse_valid is set.  With
    `with_shift`, fits sparse = s * dense + b instead and returns
    ((s, b), s * dense + b).
    """
    dense = np.asarray(dense, dtype=np.float64)
    sparse = np.asarray(sparse, dtype=np.float64)
    valid = np.asarray(sparse_valid, dtype=bool)
    if dense.shape != sparse.shape or dense.shape != valid.shape:
        raise ValueError("dense, sparse and sparse_valid shapes differ")
    if not valid.any():
        raise ValueError("no valid sparse pixels to align against")
    d = dense[valid]
    s = sparse[valid]
    if not np.all(np.isfinite(d)) or not np.all(np.isfinite(s)):
        raise ValueError("non-finite depths in the valid set")
    if np.any(d <= 0.0):
        raise ValueError("dense depth must be strictly positive where "
                         "compared")

    if with_shift:
        a = np.stack([d, np.ones_like(d)], axis=1)
        coeffs, *_ = np.linalg.lstsq(a, s, rcond=None)
        scale, shift = float(coeffs[0]), float(coeffs[1])
        return (scale, shift), scale * dense + shift

    denom = float(np.dot(d, d))
    if denom == 0.0:
        raise ValueError("dense depth is all zero over the valid set")
    scale = float(np.dot(d, s) / denom)
    return scale, scale * dense


def coverage_filter(sparse_valid: np.ndarray,
                    min_fraction: float = 0.10) -> bool:
    """Accept a guidance image iff its valid fraction is >= min_fraction."""
    valid = np.asarray(sparse_valid, dtype=bool)
    if valid.size == 0:
        return False
    return bool(valid.mean() >= min_fraction)


def relative_rotation_angle(pose_a: Pose, pose_b: Pose) -> float:
    """Geodesic angle in radians between two orientations.

    Uses acos((trace(Ra^T Rb) - 1) / 2), with the cosine clamped against
    rounding just outside [-1, 1].
    """
    rel = pose_a.rotation.T @ pose_b.rotation
    cos = (np.trace(rel) - 1.0) / 2.0
    return float(math.acos(min(1.0, max(-1.0, cos))))


def pair_selector(poses: Sequence[Pose], max_dist: float = 1.0,
                  rot_range: Tuple[float, float] = (20.0, 60.0)
                  ) -> List[Tuple[int, int]]:
    """Index pairs whose relative rotation is inside rot_range (degrees,
    inclusive) and whose camera centers are within max_dist meters.

    Each qualifying pair is emitted once as (i, j) with i < j.
    """
    if len(poses) < 2:
        raise ValueError("need at least two poses")
    lo = math.radians(rot_range[0])
    hi = math.radians(rot_range[1])
    pairs: List[Tuple[int, int]] = []
    for i in range(len(poses)):
        for j in range(i + 1, len(poses)):
            angle = relative_rotation_angle(poses[i], poses[j])
            if not lo <= angle <= hi:
                continue
            if np.linalg.norm(poses[i].translation
                              - poses[j].translation) > max_dist:
                continue
            pairs.append((i, j))
    return pairs
