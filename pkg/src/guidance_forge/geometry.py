"""Camera models, rigid poses, and projection math.

Coordinate conventions (normative for the whole package):

World frame:
    Right-handed, meters. Poses map camera coordinates into this frame.

Equirectangular camera frame:
    X forward, Y left, Z up. Azimuth theta = atan2(Y, X) in [-pi, pi),
    elevation phi = atan2(Z, hypot(X, Y)) in [-pi/2, pi/2].
    Pixel mapping: u = (theta / 2pi + 0.5) * W  (wrapped modulo W),
                   v = (0.5 - phi / pi) * H.
    Stored depth is Euclidean ray distance ||p||.
    Integer pixel coordinates are sample centers: u = W/2 is the forward
    axis, v = 0 is exactly the north pole (azimuth degenerates there and
    is tie-broken to 0).

Pinhole camera frame:
    X right, Y down, Z forward. u = fx*X/Z + cx, v = fy*Y/Z + cy.
    Stored depth is Z-depth. Points with Z <= 0 do not project.

All types are immutable after construction and all operations are pure,
so everything here is safe for unrestricted parallel use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

EQUIRECTANGULAR = "equirectangular"
PINHOLE = "pinhole"

_ORTHONORMALITY_TOL = 1e-9


class ProjectionError(ValueError):
    """Raised when a single point cannot be projected (behind camera, zero norm)."""


@dataclass(frozen=True)
class Pose:
    """Rigid transform mapping camera coordinates to world coordinates.

    rotation: 3x3 orthonormal matrix (world <- camera), det +1.
    translation: camera origin expressed in the world frame, meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err >= _ORTHONORMALITY_TOL:
            raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
        if np.linalg.det(r) <= 0:
            raise ValueError("rotation must have determinant +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        """Build from a 4x4 homogeneous world <- camera matrix."""
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: "Pose") -> "Pose":
        """Chain transforms: (self.compose(other))(p) == self(other(p))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map camera-frame points (..., 3) into the world frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True)
class CameraModel:
    """Equirectangular or pinhole intrinsics.

    Equirectangular models cover the full sphere and require width == 2 * height.
    Pinhole models carry fx, fy (pixels) and the principal point cx, cy.
    """

    variant: str
    width: int
    height: int
    fx: float = field(default=0.0)
    fy: float = field(default=0.0)
    cx: float = field(default=0.0)
    cy: float = field(default=0.0)

    def __post_init__(self):
        if self.variant not in (EQUIRECTANGULAR, PINHOLE):
            raise ValueError(f"unknown camera variant {self.variant!r}")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be >= 1")
        if self.variant == EQUIRECTANGULAR and self.width != 2 * self.height:
            raise ValueError("equirectangular model requires width == 2 * height")
        if self.variant == PINHOLE and (self.fx <= 0 or self.fy <= 0):
            raise ValueError("pinhole model requires fx, fy > 0")

    @classmethod
    def equirectangular(cls, width: int, height: int) -> "CameraModel":
        return cls(EQUIRECTANGULAR, width, height)

    @classmethod
    def pinhole(cls, width: int, height: int, fx: float, fy: float,
                cx: float, cy: float) -> "CameraModel":
        return cls(PINHOLE, width, height, fx=fx, fy=fy, cx=cx, cy=cy)


class PixelRay(NamedTuple):
    """A continuous pixel location and its unit view direction in camera frame."""

    u: float
    v: float
    direction: np.ndarray


class Projection(NamedTuple):
    """Vectorized projection result; ``valid`` is False where the point
    is behind a pinhole camera or has zero norm."""

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    valid: np.ndarray


def project(model: CameraModel, points_cam) -> Projection:
    """Project camera-frame points (..., 3) to continuous pixel coordinates.

    Equirectangular depth is the Euclidean ray distance; pinhole depth is Z.
    Pixel u is wrapped modulo W for equirectangular models. Invalid entries
    (pinhole Z <= 0, zero-norm points) carry valid=False with NaN coordinates.
    """
    p = np.asarray(points_cam, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    if model.variant == EQUIRECTANGULAR:
        norm = np.sqrt(x * x + y * y + z * z)
        valid = norm > 0
        theta = np.arctan2(y, x)
        phi = np.arctan2(z, np.hypot(x, y))
        u = np.mod((theta / (2.0 * np.pi) + 0.5) * model.width, model.width)
        v = (0.5 - phi / np.pi) * model.height
        depth = norm
    else:
        valid = z > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = model.fx * x / z + model.cx
            v = model.fy * y / z + model.cy
        depth = z
    u = np.where(valid, u, np.nan)
    v = np.where(valid, v, np.nan)
    depth = np.where(valid, depth, np.nan)
    return Projection(u, v, depth, valid)


def project_point(model: CameraModel, point_cam) -> tuple[float, float, float]:
    """Single-point projection that raises instead of masking.

    Raises ProjectionError for a zero-norm point or a point behind a
    pinhole camera.
    """
    pr = project(model, np.asarray(point_cam, dtype=np.float64).reshape(3))
    if not bool(pr.valid):
        if model.variant == PINHOLE and np.asarray(point_cam).reshape(3)[2] <= 0:
            raise ProjectionError("point is behind the camera (Z <= 0)")
        raise ProjectionError("cannot project a zero-norm point")
    return float(pr.u), float(pr.v), float(pr.depth)


def pixel_ray(model: CameraModel, u, v) -> np.ndarray:
    """Unit view direction(s) in the camera frame for continuous pixels.

    Accepts scalars or broadcastable arrays; returns shape (..., 3).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if model.variant == EQUIRECTANGULAR:
        theta = (u / model.width - 0.5) * 2.0 * np.pi
        phi = (0.5 - v / model.height) * np.pi
        c = np.cos(phi)
        d = np.stack([c * np.cos(theta), c * np.sin(theta), np.sin(phi)], axis=-1)
    else:
        x = (u - model.cx) / model.fx
        y = (v - model.cy) / model.fy
        d = np.stack([x, y, np.ones_like(x)], axis=-1)
        d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    return d


def unproject(model: CameraModel, u, v, depth) -> np.ndarray:
    """Lift pixels back to camera-frame 3D points.

    u, v must lie in [0, W) x [0, H) and depth must be positive. Depth is
    interpreted per the model convention (ray distance for equirectangular,
    Z-depth for pinhole), the exact inverse of ``project``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise ValueError("depth must be positive")
    if np.any(u < 0) or np.any(u >= model.width) or np.any(v < 0) or np.any(v >= model.height):
        raise ValueError("pixel coordinates out of bounds")
    if model.variant == EQUIRECTANGULAR:
        return pixel_ray(model, u, v) * depth[..., None]
    x = (u - model.cx) / model.fx * depth
    y = (v - model.cy) / model.fy * depth
    return np.stack([x, y, np.broadcast_to(depth, x.shape)], axis=-1)


def transform_points(pose_src: Pose, pose_dst: Pose, points) -> np.ndarray:
    """Re-express points (..., 3) from one camera frame in another.

    p_dst = R_dst^T (R_src p_src + t_src - t_dst).
    """
    p = np.asarray(points, dtype=np.float64)
    world = p @ pose_src.rotation.T + pose_src.translation
    return (world - pose_dst.translation) @ pose_dst.rotation


def load_poses(path) -> dict:
    """Read a pose file: JSON array of {id, matrix} with a row-major 4x4
    world <- camera matrix. Returns {id: Pose} preserving file order."""
    with open(path) as f:
        entries = json.load(f)
    poses = {}
    for entry in entries:
        m = np.asarray(entry["matrix"], dtype=np.float64).reshape(4, 4)
        poses[entry["id"]] = Pose.from_matrix(m)
    return poses


def save_poses(poses: dict, path) -> None:
    entries = [{"id": k, "matrix": [float(x) for x in p.matrix().reshape(-1)]}
               for k, p in poses.items()]
    with open(path, "w") as f:
        json.dump(entries, f, indent=2)
        f.write("\n")


def load_camera(path) -> CameraModel:
    """Read a camera file: JSON {type, width, height, fx?, fy?, cx?, cy?}."""
    with open(path) as f:
        spec = json.load(f)
    kind = spec["type"]
    if kind == EQUIRECTANGULAR:
        return CameraModel.equirectangular(int(spec["width"]), int(spec["height"]))
    if kind == PINHOLE:
        return CameraModel.pinhole(int(spec["width"]), int(spec["height"]),
                                   float(spec["fx"]), float(spec["fy"]),
                                   float(spec["cx"]), float(spec["cy"]))
    raise ValueError(f"unknown camera type {kind!r}")


def save_camera(model: CameraModel, path) -> None:
    spec = {"type": model.variant, "width": model.width, "height": model.height}
    if model.variant == PINHOLE:
        spec.update(fx=model.fx, fy=model.fy, cx=model.cx, cy=model.cy)
    with open(path, "w") as f:
        json.dump(spec, f, indent=2)
        f.write("\n")
