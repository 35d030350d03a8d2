"""Synthetic textured-room renderer for tests, fixtures and demos.

The scene is the interior of an axis-aligned box painted with a smooth
trigonometric texture.  Colors are a pure function of the world-space hit
point, so renders from different poses are multi-view consistent: lifting
one frame's RGB-D to a point cloud and reprojecting it into another frame
reproduces that frame's colors wherever the surfaces agree.

Rays are cast analytically (slab exit test from a camera strictly inside
the box), so depth is exact to rounding, not a rasterization.
"""

from __future__ import annotations

import dataclasses
import math
from typing import List, Sequence

import numpy as np

from .geometry import EQUIRECTANGULAR, CameraModel, Pose, pixel_ray
from .pointcloud import RgbdFrame

_TEX_FREQ = np.array([
    [1.9, 0.5, 0.8],
    [0.4, 1.6, 0.6],
    [0.7, 0.9, 1.4],
])
_TEX_PHASE = np.array([0.0, 2.1, 4.2])


def room_texture(points: np.ndarray) -> np.ndarray:
    """Smooth deterministic color field over world points (..., 3) -> rgb."""
    p = np.asarray(points, dtype=np.float64)
    waves = p @ _TEX_FREQ.T + _TEX_PHASE
    return 0.5 + 0.45 * np.sin(waves)


@dataclasses.dataclass(frozen=True)
class RoomScene:
    """Axis-aligned box room; cameras must sit strictly inside."""

    bounds_min: tuple = (-4.0, -3.0, -1.6)
    bounds_max: tuple = (3.0, 4.0, 1.9)

    def __post_init__(self):
        lo = np.asarray(self.bounds_min, dtype=np.float64)
        hi = np.asarray(self.bounds_max, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(lo >= hi):
            raise ValueError("bounds_min must be strictly below bounds_max")

    def contains(self, point: np.ndarray) -> bool:
        p = np.asarray(point, dtype=np.float64)
        lo = np.asarray(self.bounds_min)
        hi = np.asarray(self.bounds_max)
        return bool(np.all(p > lo) and np.all(p < hi))

    def ray_exit(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Distance to the box wall for unit rays from an interior origin.

        dirs: (..., 3).  Returns t (...,) with origin + t * dirs on a wall.
        """
        if not self.contains(origin):
            raise ValueError("ray origin must lie strictly inside the room")
        lo = np.asarray(self.bounds_min)
        hi = np.asarray(self.bounds_max)
        d = np.asarray(dirs, dtype=np.float64)
        o = np.asarray(origin, dtype=np.float64)
        with np.errstate(divide="ignore"):
            t_lo = (lo - o) / d
            t_hi = (hi - o) / d
        # the facing wall per axis is whichever slab crossing is ahead
        t_axis = np.where(d > 0, t_hi, t_lo)
        t_axis = np.where(d == 0, np.inf, t_axis)
        return t_axis.min(axis=-1)


def render_room_frame(scene: RoomScene, pose: Pose,
                      camera: CameraModel) -> RgbdFrame:
    """Exact RGB-D render of the room from a pose, fully valid."""
    us, vs = np.meshgrid(np.arange(camera.width, dtype=np.float64),
                         np.arange(camera.height, dtype=np.float64))
    dirs_cam = pixel_ray(camera, us, vs)
    dirs_world = dirs_cam @ pose.rotation.T
    t = scene.ray_exit(pose.translation, dirs_world)
    points = pose.translation + t[..., None] * dirs_world
    rgb = np.clip(room_texture(points), 0.0, 1.0)
    if camera.variant == EQUIRECTANGULAR:
        depth = t
    else:
        depth = t * dirs_cam[..., 2]
    valid = np.isfinite(depth) & (depth > 0.0)
    return RgbdFrame(rgb=rgb, depth=np.where(valid, depth, 0.0),
                     valid=valid, pose=pose, camera=camera)


def pose_from_yaw(yaw: float, position: Sequence[float]) -> Pose:
    """Panoramic-convention pose: forward along yaw, up along world +z."""
    c, s = math.cos(yaw), math.sin(yaw)
    rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return Pose(rotation, np.asarray(position, dtype=np.float64))


def pinhole_pose_from_yaw(yaw: float, position: Sequence[float]) -> Pose:
    """Pinhole-convention pose (x right, y down, z forward along yaw)."""
    c, s = math.cos(yaw), math.sin(yaw)
    right = np.array([s, -c, 0.0])
    down = np.array([0.0, 0.0, -1.0])
    forward = np.array([c, s, 0.0])
    rotation = np.stack([right, down, forward], axis=1)
    return Pose(rotation, np.asarray(position, dtype=np.float64))


def ring_trajectory(count: int, radius: float = 1.0, height: float = 0.0,
                    yaw_step: float = 0.35) -> List[Pose]:
    """Poses on a circle in the ground plane, heading advancing with index."""
    if count < 1:
        raise ValueError("count must be >= 1")
    poses = []
    for i in range(count):
        angle = 2.0 * math.pi * i / count
        position = (radius * math.cos(angle), radius * math.sin(angle),
                    height)
        poses.append(pose_from_yaw(yaw_step * i, position))
    return poses
