"""RGB-D frame accumulation into world-frame point clouds and z-buffered
reprojection into sparse guidance images.

PointCloud is an immutable snapshot: accumulation and rollout always
produce new snapshots, so concurrent readers are safe. Rendering is
deterministic: per pixel the nearest point wins and exact depth ties go
to the lowest point index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .geometry import EQUIRECTANGULAR, CameraModel, Pose, project, unproject

logger = logging.getLogger(__name__)

POINT_COUNT_WARN = 10_000_000

# Predicted pixels outside this depth band are never lifted into the
# cloud; degenerate generator outputs would otherwise poison it.
PREDICTION_DEPTH_MIN = 0.1
PREDICTION_DEPTH_MAX = 20.0


def _frozen_copy(a, dtype):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class RgbdFrame:
    """One registered RGB-D observation.

    rgb: H x W x 3 in [0, 1]; depth: H x W meters; valid: H x W booleans.
    Valid pixels must carry positive finite depth.
    """

    rgb: np.ndarray
    depth: np.ndarray
    valid: np.ndarray
    pose: Pose
    camera: CameraModel

    def __post_init__(self):
        rgb = _frozen_copy(self.rgb, np.float64)
        depth = _frozen_copy(self.depth, np.float64)
        valid = _frozen_copy(self.valid, bool)
        h, w = depth.shape
        if rgb.shape != (h, w, 3) or valid.shape != (h, w):
            raise ValueError("rgb/depth/valid shapes are inconsistent")
        if (h, w) != (self.camera.height, self.camera.width):
            raise ValueError("frame shape does not match the camera model")
        if rgb.size and (rgb.min() < 0.0 or rgb.max() > 1.0):
            raise ValueError("rgb values must lie in [0, 1]")
        d = depth[valid]
        if d.size and (not np.all(np.isfinite(d)) or np.any(d <= 0)):
            raise ValueError("valid pixels must have positive finite depth")
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "valid", valid)


@dataclass(frozen=True)
class PointCloud:
    """Colored world-frame points with per-point source frame indices."""

    positions: np.ndarray  # N x 3 meters
    colors: np.ndarray  # N x 3 in [0, 1]
    source: np.ndarray  # N frame indices

    def __post_init__(self):
        positions = _frozen_copy(self.positions, np.float64).reshape(-1, 3)
        colors = _frozen_copy(self.colors, np.float64).reshape(-1, 3)
        source = _frozen_copy(self.source, np.int64).reshape(-1)
        if not (len(positions) == len(colors) == len(source)):
            raise ValueError("positions/colors/source lengths differ")
        if positions.size and not np.all(np.isfinite(positions)):
            raise ValueError("point positions must be finite")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "source", source)

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, dtype=np.int64))

    def extend(self, positions, colors, source_index: int) -> "PointCloud":
        """New snapshot with extra points tagged with one source index."""
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
        tags = np.full(len(positions), source_index, dtype=np.int64)
        return PointCloud(np.concatenate([self.positions, positions]),
                          np.concatenate([self.colors, colors]),
                          np.concatenate([self.source, tags]))


@dataclass(frozen=True)
class GuidanceImage:
    """Sparse reprojected RGB-D with a validity mask; the model input.

    Construction normalizes the arrays so that invalid pixels carry
    rgb = 0 and depth = 0 exactly.
    """

    rgb: np.ndarray
    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        valid = _frozen_copy(self.valid, bool)
        rgb = np.array(self.rgb, dtype=np.float64)
        depth = np.array(self.depth, dtype=np.float64)
        if rgb.shape[:2] != valid.shape or depth.shape != valid.shape:
            raise ValueError("rgb/depth/valid shapes are inconsistent")
        if np.any(depth[valid] <= 0):
            raise ValueError("valid guidance pixels must have positive depth")
        rgb[~valid] = 0.0
        depth[~valid] = 0.0
        rgb.setflags(write=False)
        depth.setflags(write=False)
        object.__setattr__(self, "rgb", rgb)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "valid", valid)

    @property
    def coverage(self) -> float:
        """Fraction of pixels carrying valid guidance."""
        return float(self.valid.mean())


class GuidancePredictor(Protocol):
    """Anything that completes a guidance image into a dense RGB-D frame."""

    def predict(self, guidance: GuidanceImage) -> tuple[np.ndarray, np.ndarray]:
        """Return (rgb H x W x 3 in [0, 1], depth H x W meters)."""
        ...


def lift_frame(frame: RgbdFrame) -> tuple[np.ndarray, np.ndarray]:
    """Lift a frame's valid pixels to world-frame points.

    Ordering is row-major over the image, matching np.nonzero. Returns
    (positions N x 3, colors N x 3).
    """
    rows, cols = np.nonzero(frame.valid)
    if rows.size == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    depth = frame.depth[rows, cols]
    pts_cam = unproject(frame.camera, cols.astype(np.float64), rows.astype(np.float64), depth)
    return frame.pose.apply(pts_cam), frame.rgb[rows, cols]


def accumulate(frames: Sequence[RgbdFrame], voxel_size: float | None = None) -> PointCloud:
    """Fuse RGB-D frames into a world-frame point cloud.

    Point order is deterministic: frame-major, row-major. ``voxel_size``
    (meters) optionally deduplicates points on a grid keyed by
    floor(p / voxel_size), keeping the first point in each cell.
    """
    if len(frames) == 0:
        raise ValueError("accumulate requires at least one frame")
    positions, colors, source = [], [], []
    for idx, frame in enumerate(frames):
        p, c = lift_frame(frame)
        positions.append(p)
        colors.append(c)
        source.append(np.full(len(p), idx, dtype=np.int64))
    positions = np.concatenate(positions)
    colors = np.concatenate(colors)
    source = np.concatenate(source)
    if voxel_size:
        keys = np.floor(positions / voxel_size).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
        keep = np.sort(first)
        positions, colors, source = positions[keep], colors[keep], source[keep]
    if len(positions) > POINT_COUNT_WARN:
        logger.warning("point cloud holds %d points (> %d); consider voxel dedup",
                       len(positions), POINT_COUNT_WARN)
    return PointCloud(positions, colors, source)


def render_guidance(cloud: PointCloud, pose: Pose, camera: CameraModel,
                    splat_radius: int = 0) -> GuidanceImage:
    """Reproject a point cloud to a pose, resolving visibility by z-buffer.

    Each point is rounded to its nearest pixel (``splat_radius`` grows the
    footprint to a (2r+1)^2 square). Per pixel the smallest depth wins and
    exact depth ties go to the lowest point index; the output is identical
    to a sequential scan applying that rule, whatever the internal order.
    Horizontal coordinates wrap for equirectangular cameras; pinhole
    cameras clip out-of-bounds points.
    """
    h, w = camera.height, camera.width
    rgb = np.zeros((h, w, 3))
    depth = np.zeros((h, w))
    valid = np.zeros((h, w), dtype=bool)
    if len(cloud) == 0:
        return GuidanceImage(rgb, depth, valid)

    pts_cam = (cloud.positions - pose.translation) @ pose.rotation
    pr = project(camera, pts_cam)
    ok = pr.valid
    u = np.rint(pr.u[ok]).astype(np.int64)
    v = np.rint(pr.v[ok]).astype(np.int64)
    d = pr.depth[ok]
    c = cloud.colors[ok]
    idx = np.nonzero(ok)[0]

    flat_all, d_all, c_all, i_all = [], [], [], []
    for dv in range(-splat_radius, splat_radius + 1):
        for du in range(-splat_radius, splat_radius + 1):
            uu, vv = u + du, v + dv
            if camera.variant == EQUIRECTANGULAR:
                uu = np.mod(uu, w)
                vv = np.clip(vv, 0, h - 1)
                keep = slice(None)
            else:
                keep = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
            flat_all.append(vv[keep] * w + uu[keep])
            d_all.append(d[keep])
            c_all.append(c[keep])
            i_all.append(idx[keep])
    flat = np.concatenate(flat_all)
    d = np.concatenate(d_all)
    c = np.concatenate(c_all)
    idx = np.concatenate(i_all)

    # Write worst-to-best so the last write per pixel is the nearest
    # depth, with exact ties resolved to the lowest point index.
    order = np.lexsort((-idx, -d))
    flat, d, c = flat[order], d[order], c[order]
    rgb.reshape(-1, 3)[flat] = c
    depth.reshape(-1)[flat] = d
    valid.reshape(-1)[flat] = True
    return GuidanceImage(rgb, depth, valid)


@dataclass(frozen=True)
class RolloutResult:
    """Predicted frames plus the guidance image each prediction consumed."""

    frames: list
    guidances: list


def rollout(context: Sequence[RgbdFrame], targets: Sequence[Pose],
            generator: GuidancePredictor, camera: CameraModel | None = None,
            accumulate_predictions: bool = True,
            depth_min: float = PREDICTION_DEPTH_MIN,
            depth_max: float = PREDICTION_DEPTH_MAX,
            voxel_size: float | None = None) -> RolloutResult:
    """Predict frames at target poses, feeding predictions back into the cloud.

    For each target pose in order: render a guidance image from the
    current cloud, complete it with the generator, and (unless
    ``accumulate_predictions`` is off) lift the predicted RGB-D back into
    the cloud so later steps stay 3D-consistent. Predicted pixels outside
    (depth_min, depth_max) are not lifted. The target camera defaults to
    the first context frame's model.
    """
    if len(context) == 0:
        raise ValueError("rollout requires at least one context frame")
    camera = camera or context[0].camera
    cloud = accumulate(context, voxel_size=voxel_size)
    frames: list[RgbdFrame] = []
    guidances: list[GuidanceImage] = []
    for step, target in enumerate(targets):
        guidance = render_guidance(cloud, target, camera)
        rgb, depth = generator.predict(guidance)
        rgb = np.asarray(rgb, dtype=np.float64)
        depth = np.asarray(depth, dtype=np.float64)
        if rgb.shape != (camera.height, camera.width, 3) or depth.shape != (camera.height, camera.width):
            raise ValueError(
                f"generator output shape {rgb.shape}/{depth.shape} does not match "
                f"camera {camera.height}x{camera.width}")
        keep = (depth > depth_min) & (depth < depth_max) & np.isfinite(depth)
        frame = RgbdFrame(np.clip(rgb, 0.0, 1.0), depth, keep, target, camera)
        frames.append(frame)
        guidances.append(guidance)
        if accumulate_predictions:
            positions, colors = lift_frame(frame)
            cloud = cloud.extend(positions, colors, len(context) + step)
    return RolloutResult(frames, guidances)


_CLOUD_DTYPE = np.dtype([("position", "<f8", (3,)),
                         ("color", "<f8", (3,)),
                         ("source", "<i8")])


def save_cloud(path, cloud: PointCloud) -> None:
    """Write a cloud as a single structured .npy record array.

    The npy header holds only dtype and shape, so identical clouds produce
    byte-identical files.
    """
    arr = np.empty(len(cloud), dtype=_CLOUD_DTYPE)
    arr["position"] = cloud.positions
    arr["color"] = cloud.colors
    arr["source"] = cloud.source
    with open(path, "wb") as fh:
        np.save(fh, arr)


def load_cloud(path) -> PointCloud:
    with open(path, "rb") as fh:
        arr = np.load(fh)
    if arr.dtype.names != _CLOUD_DTYPE.names:
        raise ValueError(f"{path}: not a point cloud file")
    return PointCloud(arr["position"], arr["color"], arr["source"])
