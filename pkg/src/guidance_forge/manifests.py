"""Trajectory manifests: JSON-lines frame lists plus pose/camera sidecars.

A trajectory on disk is a directory holding
    manifest.jsonl   one frame per line: {"rgb_path", "depth_path", "pose_id"}
    poses.json       [{"id", "matrix"}] with row-major 4x4 world <- camera
    camera.json      camera model description
    *.png            8-bit rgb and 16-bit millimeter depth images

Paths inside the manifest are relative to the manifest file.  Depth PNGs
natively store the camera's own convention (ray distance for panoramas,
Z-depth for pinholes); `depth_convention` lets ingest reinterpret foreign
files and convert them to the native convention on load.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import pngio
from .geometry import (EQUIRECTANGULAR, PINHOLE, CameraModel, Pose,
                       load_camera, load_poses, pixel_ray, save_camera,
                       save_poses)
from .pointcloud import RgbdFrame

PathLike = Union[str, Path]

# depth_convention values accepted at ingest
NATIVE = "native"
RAY = "ray"          # Euclidean distance along the pixel ray
PLANAR = "z"         # pinhole: Z-depth; panorama: horizontal range


@dataclasses.dataclass(frozen=True)
class FrameRecord:
    rgb_path: str
    depth_path: str
    pose_id: str


def write_manifest(path: PathLike, records: Sequence[FrameRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({"rgb_path": rec.rgb_path,
                                 "depth_path": rec.depth_path,
                                 "pose_id": rec.pose_id},
                                sort_keys=True) + "\n")


def read_manifest(path: PathLike) -> List[FrameRecord]:
    records = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                records.append(FrameRecord(rgb_path=data["rgb_path"],
                                           depth_path=data["depth_path"],
                                           pose_id=str(data["pose_id"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}:{line_no}: bad manifest line "
                                 f"({exc})") from exc
    return records


def convert_depth(depth: np.ndarray, valid: np.ndarray, camera: CameraModel,
                  convention: str) -> Tuple[np.ndarray, np.ndarray]:
    """Convert depth read under `convention` into the camera's native one.

    Pinhole native is Z-depth; `ray` input is multiplied by the ray's unit
    z-component.  Panorama native is ray distance; `z` input is read as
    horizontal range (distance to the camera's vertical axis) and divided
    by cos(elevation), with near-pole pixels invalidated.
    """
    native = RAY if camera.variant == EQUIRECTANGULAR else PLANAR
    if convention in (NATIVE, native):
        return depth, valid
    us, vs = np.meshgrid(np.arange(camera.width, dtype=np.float64),
                         np.arange(camera.height, dtype=np.float64))
    dirs = pixel_ray(camera, us, vs)
    if camera.variant == PINHOLE and convention == RAY:
        factor = dirs[..., 2]
    elif camera.variant == EQUIRECTANGULAR and convention == PLANAR:
        horizontal = np.hypot(dirs[..., 0], dirs[..., 1])
        keep = horizontal > 1e-6
        out = np.where(valid & keep, depth / np.where(keep, horizontal, 1.0),
                       0.0)
        return out, valid & keep
    else:
        raise ValueError(f"unsupported depth convention {convention!r} for "
                         f"{camera.variant} cameras")
    out = np.where(valid, depth * factor, 0.0)
    return out, valid & (out > 0)


def load_trajectory(manifest_path: PathLike,
                    poses_path: Optional[PathLike] = None,
                    camera_path: Optional[PathLike] = None,
                    camera: Optional[CameraModel] = None,
                    depth_convention: str = NATIVE) -> List[RgbdFrame]:
    """Load manifest frames as RgbdFrame objects, in manifest order."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    if poses_path is None:
        poses_path = base / "poses.json"
    if camera is None:
        camera = load_camera(camera_path or base / "camera.json")
    poses = {str(k): v for k, v in load_poses(poses_path).items()}
    frames = []
    for rec in read_manifest(manifest_path):
        if rec.pose_id not in poses:
            raise ValueError(f"manifest references unknown pose id "
                             f"{rec.pose_id!r}")
        rgb = pngio.read_rgb(base / rec.rgb_path)
        depth, valid = pngio.read_depth(base / rec.depth_path)
        depth, valid = convert_depth(depth, valid, camera, depth_convention)
        frames.append(RgbdFrame(rgb=rgb, depth=np.where(valid, depth, 0.0),
                                valid=valid, pose=poses[rec.pose_id],
                                camera=camera))
    return frames


def save_trajectory(directory: PathLike, frames: Sequence[RgbdFrame],
                    prefix: str = "frame") -> Path:
    """Write frames as PNG pairs plus manifest/pose/camera sidecars.

    Returns the manifest path.  All frames must share one camera model.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if not frames:
        raise ValueError("no frames to save")
    camera = frames[0].camera
    records = []
    poses = {}
    for i, frame in enumerate(frames):
        if frame.camera != camera:
            raise ValueError("frames mix camera models")
        name = f"{prefix}_{i:04d}"
        pngio.write_rgb(directory / f"{name}_rgb.png", frame.rgb)
        pngio.write_depth(directory / f"{name}_depth.png", frame.depth,
                          frame.valid)
        poses[name] = frame.pose
        records.append(FrameRecord(rgb_path=f"{name}_rgb.png",
                                   depth_path=f"{name}_depth.png",
                                   pose_id=name))
    save_poses(poses, directory / "poses.json")
    save_camera(camera, directory / "camera.json")
    manifest = directory / "manifest.jsonl"
    write_manifest(manifest, records)
    return manifest
