"""Trajectory augmentation: spatially perturbed viewpoints with depth-based
free-space rejection.

Navigation trajectories are enriched by re-synthesizing each frame from a
nearby pose.  A candidate displacement is drawn uniformly (wide in the
ground plane, narrow vertically), checked against the frame's own depth in
that direction so the camera never lands inside geometry, and the surviving
pose is rendered by fusing the two nearest other frames into a point cloud,
reprojecting it to guidance, and running the completion generator.
"""

from __future__ import annotations

import warnings
from typing import List, Optional, Sequence, Union

import numpy as np

from .geometry import EQUIRECTANGULAR, Pose, project
from .pointcloud import (GuidanceImage, GuidancePredictor, RgbdFrame,
                         accumulate, render_guidance)

SeedLike = Union[int, Sequence[int]]

DEFAULT_HORIZ = 1.5
DEFAULT_VERT = 0.1
DEFAULT_MARGIN = 0.1
DEFAULT_MAX_TRIES = 16


def _depth_toward(frame: RgbdFrame, delta: np.ndarray) -> Optional[float]:
    """Depth of the frame's surface in the direction of delta (camera frame).

    Looks up the nearest pixel; if that pixel is invalid, falls back to the
    median of valid depths in the surrounding 5x5 window.  Returns None when
    the direction cannot be resolved (projection failure or a fully invalid
    window).
    """
    cam = frame.camera
    pr = project(cam, delta.reshape(1, 3))
    if not pr.valid[0]:
        return None
    u = int(np.rint(pr.u[0]))
    v = int(np.rint(pr.v[0]))
    wrap = cam.variant == EQUIRECTANGULAR
    if wrap:
        u %= cam.width
        v = min(max(v, 0), cam.height - 1)
    elif not (0 <= u < cam.width and 0 <= v < cam.height):
        return None
    if frame.valid[v, u]:
        return float(frame.depth[v, u])
    vs = np.clip(np.arange(v - 2, v + 3), 0, cam.height - 1)
    us = np.arange(u - 2, u + 3)
    us = us % cam.width if wrap else np.clip(us, 0, cam.width - 1)
    window_valid = frame.valid[np.ix_(vs, us)]
    if not window_valid.any():
        return None
    return float(np.median(frame.depth[np.ix_(vs, us)][window_valid]))


def sample_perturbation(frame: RgbdFrame, rng_seed: SeedLike,
                        horiz: float = DEFAULT_HORIZ,
                        vert: float = DEFAULT_VERT,
                        max_tries: int = DEFAULT_MAX_TRIES,
                        margin: float = DEFAULT_MARGIN) -> Pose:
    """Draw a free-space-checked perturbed pose for one frame.

    Displacements are drawn in the frame's camera axes (for the panoramic
    convention these are the ground-plane axes): the two horizontal
    components from U(-horiz, horiz), the vertical one from U(-vert, vert).
    A draw is accepted iff ||delta|| < depth(direction of delta) - margin,
    read from the frame's own depth image.  The rotation is never changed;
    an accepted delta moves the camera center by R @ delta.  After
    max_tries rejected draws the original pose is returned.
    """
    if max_tries < 1:
        raise ValueError("max_tries must be >= 1")
    if not frame.valid.any():
        warnings.warn("frame has no valid depth; returning the pose "
                      "unperturbed")
        return frame.pose
    rng = np.random.default_rng(rng_seed)
    for _ in range(max_tries):
        delta = np.array([rng.uniform(-horiz, horiz),
                          rng.uniform(-horiz, horiz),
                          rng.uniform(-vert, vert)])
        if not delta.any():
            # zero displacement never enters geometry
            return frame.pose
        depth = _depth_toward(frame, delta)
        if depth is None:
            continue
        if float(np.linalg.norm(delta)) < depth - margin:
            return Pose(frame.pose.rotation,
                        frame.pose.apply(delta.reshape(1, 3))[0])
    return frame.pose


def nearest_context_indices(positions: np.ndarray, query: int,
                            count: int = 2) -> List[int]:
    """Indices of the `count` frames closest to `query`, excluding it.

    Distances are camera-center distances; ties resolve to the lower index
    (stable sort).
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if n <= count:
        raise ValueError(f"need at least {count + 1} frames")
    dist = np.linalg.norm(positions - positions[query], axis=1)
    order = [i for i in np.argsort(dist, kind="stable") if i != query]
    return [int(i) for i in order[:count]]


def augment_trajectory(frames: Sequence[RgbdFrame],
                       generator: GuidancePredictor,
                       rng_seed: int,
                       horiz: float = DEFAULT_HORIZ,
                       vert: float = DEFAULT_VERT,
                       max_tries: int = DEFAULT_MAX_TRIES,
                       margin: float = DEFAULT_MARGIN,
                       splat_radius: int = 0) -> List[RgbdFrame]:
    """Re-synthesize every frame of a trajectory at a perturbed pose.

    Per frame: sample a perturbation (RNG stream split per frame index from
    the master seed, so frames are independent and order-insensitive), fuse
    the two nearest other frames into a point cloud, render guidance at the
    perturbed pose, and complete it with the generator.  Output frames keep
    their camera models; validity marks pixels where the completed depth is
    positive and finite.
    """
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    centers = np.stack([f.pose.translation for f in frames])
    out: List[RgbdFrame] = []
    for i, frame in enumerate(frames):
        new_pose = sample_perturbation(frame, [rng_seed, i], horiz=horiz,
                                       vert=vert, max_tries=max_tries,
                                       margin=margin)
        ctx = nearest_context_indices(centers, i,
                                      count=min(2, len(frames) - 1))
        cloud = accumulate([frames[j] for j in ctx])
        guidance = render_guidance(cloud, new_pose, frame.camera,
                                   splat_radius=splat_radius)
        rgb, depth = generator.predict(guidance)
        valid = np.isfinite(depth) & (depth > 0.0)
        out.append(RgbdFrame(rgb=np.clip(rgb, 0.0, 1.0),
                             depth=np.where(valid, depth, 0.0),
                             valid=valid, pose=new_pose,
                             camera=frame.camera))
    return out


class GuidanceEcho:
    """Identity-behaving stand-in for a generator: returns guidance as-is.

    Useful for exercising the augmentation plumbing without a trained
    model; invalid pixels come back with zero depth (hence invalid).
    """

    def predict(self, guidance: GuidanceImage):
        return guidance.rgb.copy(), guidance.depth.copy()
