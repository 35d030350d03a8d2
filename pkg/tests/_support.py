"""Shared test helpers: independent oracles and small model configs.

The oracles here deliberately re-derive expected values through a
different route than the library (sequential dict scans, per-window
loops, axis-angle construction) so tests compare two independent
implementations instead of the code against itself.
"""

from __future__ import annotations

import math

import numpy as np

from guidance_forge.geometry import (EQUIRECTANGULAR, CameraModel, Pose,
                                     project)
from guidance_forge.pointcloud import GuidanceImage, PointCloud
from guidance_forge.synthetic import (RoomScene, pinhole_pose_from_yaw,
                                      pose_from_yaw, render_room_frame)

# Frozen micro model hyperparameters shared by the gradient-check and
# CLI determinism tests: 2171 generator + 1112 discriminator parameters.
MICRO_GENERATOR = dict(stage_widths=(2, 3, 4, 4), bottleneck_depth=2,
                       head_width=2, head_depth=0)
MICRO_DISCRIMINATOR = dict(base_width=1, stride2_layers=3)


def render_guidance_scan(cloud: PointCloud, pose: Pose,
                         camera: CameraModel) -> GuidanceImage:
    """Brute-force z-buffer: a sequential scan keeping the nearest depth,
    exact ties resolved to the lowest point index."""
    h, w = camera.height, camera.width
    rgb = np.zeros((h, w, 3))
    depth = np.zeros((h, w))
    valid = np.zeros((h, w), dtype=bool)
    if len(cloud) == 0:
        return GuidanceImage(rgb, depth, valid)
    pts_cam = (cloud.positions - pose.translation) @ pose.rotation
    pr = project(camera, pts_cam)
    best: dict = {}
    for i in range(len(cloud)):
        if not pr.valid[i]:
            continue
        u = int(np.rint(pr.u[i]))
        v = int(np.rint(pr.v[i]))
        if camera.variant == EQUIRECTANGULAR:
            u %= w
            v = min(max(v, 0), h - 1)
        elif not (0 <= u < w and 0 <= v < h):
            continue
        d = pr.depth[i]
        key = (v, u)
        if key not in best or d < best[key][0]:
            best[key] = (d, i)
    for (v, u), (d, i) in best.items():
        rgb[v, u] = cloud.colors[i]
        depth[v, u] = d
        valid[v, u] = True
    return GuidanceImage(rgb, depth, valid)


def random_cloud(rng: np.random.Generator, n: int,
                 spread: float = 3.0) -> PointCloud:
    """Cloud with injected duplicate positions to exercise depth ties."""
    positions = rng.uniform(-spread, spread, size=(n, 3))
    if n >= 8:
        # duplicate a block of points verbatim: identical projected depth,
        # so only the index tie-break separates them
        k = n // 8
        positions[n - k:] = positions[:k]
    colors = rng.uniform(0.0, 1.0, size=(n, 3))
    return PointCloud(positions, colors, np.zeros(n, dtype=np.int64))


def partial_conv_scan(x: np.ndarray, mask: np.ndarray, weight: np.ndarray,
                      bias: np.ndarray | None, stride: int,
                      padding: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-window loop reference for the mask-renormalized convolution."""
    n, cin, h, w = x.shape
    cout, _, kh, kw = weight.shape
    xp = np.zeros((n, cin, h + 2 * padding, w + 2 * padding))
    mp = np.zeros((n, 1, h + 2 * padding, w + 2 * padding))
    xp[:, :, padding:padding + h, padding:padding + w] = x
    mp[:, :, padding:padding + h, padding:padding + w] = mask
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    mask_out = np.zeros((n, 1, ho, wo))
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                mwin = mp[b, 0, i * stride:i * stride + kh,
                          j * stride:j * stride + kw]
                s = mwin.sum()
                if s <= 0:
                    continue
                mask_out[b, 0, i, j] = 1.0
                xwin = xp[b, :, i * stride:i * stride + kh,
                          j * stride:j * stride + kw] * mwin
                for c in range(cout):
                    acc = float((weight[c] * xwin).sum()) * (kh * kw / s)
                    if bias is not None:
                        acc += float(bias[c])
                    out[b, c, i, j] = acc
    return out, mask_out


def gapped_matrix(rng: np.random.Generator, max_ratio: float = 0.85):
    """Random matrix with a bounded sigma_2 / sigma_1 ratio, plus its SVD
    spectrum.

    Power iteration converges like (sigma_2 / sigma_1)^(2k); an
    unconstrained Gaussian draw can land arbitrarily close to a repeated
    top singular value and stall, so near-degenerate draws are rejected.
    """
    while True:
        rows = int(rng.integers(2, 24))
        cols = int(rng.integers(2, 24))
        w = rng.normal(size=(rows, cols))
        spectrum = np.linalg.svd(w, compute_uv=False)
        if len(spectrum) < 2 or spectrum[1] <= max_ratio * spectrum[0]:
            return w, spectrum


def rodrigues(axis, angle: float) -> np.ndarray:
    """Rotation matrix about a unit axis by a known angle (independent
    construction for rotation-angle oracles)."""
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    k = np.array([[0.0, -a[2], a[1]],
                  [a[2], 0.0, -a[0]],
                  [-a[1], a[0], 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def rotation_angle_atan2(ra: np.ndarray, rb: np.ndarray) -> float:
    """Angle between orientations via the skew part and atan2, a distinct
    formula from the library's pure-arccos form."""
    rel = ra.T @ rb
    vee = 0.5 * np.array([rel[2, 1] - rel[1, 2],
                          rel[0, 2] - rel[2, 0],
                          rel[1, 0] - rel[0, 1]])
    return math.atan2(np.linalg.norm(vee), (np.trace(rel) - 1.0) / 2.0)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return rodrigues(rng.normal(size=3), rng.uniform(0.0, math.pi))


def room_frames_equirect(count: int = 3, width: int = 128):
    scene = RoomScene()
    cam = CameraModel.equirectangular(width, width // 2)
    poses = [pose_from_yaw(0.4 * i, (0.3 * i - 0.4, 0.2 * i, 0.1 * (i % 2)))
             for i in range(count)]
    return [render_room_frame(scene, p, cam) for p in poses]


def room_frames_pinhole(count: int = 3, size: int = 64):
    scene = RoomScene()
    cam = CameraModel.pinhole(size, size, fx=0.625 * size, fy=0.625 * size,
                              cx=(size - 1) / 2.0, cy=(size - 1) / 2.0)
    poses = [pinhole_pose_from_yaw(0.5 * i, (0.25 * i - 0.3, 0.15 * i, 0.0))
             for i in range(count)]
    return [render_room_frame(scene, p, cam) for p in poses]
