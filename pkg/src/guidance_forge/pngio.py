"""PNG encodings for RGB and metric depth images.

RGB is 8-bit PNG. Depth is 16-bit grayscale PNG holding millimeters,
value 0 meaning invalid; the representable range therefore caps at
65.535 m with 1 mm quantization. Both directions are bit-exact: writing
then reading a depth map loses nothing beyond the millimeter rounding
applied at write time.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

DEPTH_UNITS_PER_METER = 1000.0
MAX_DEPTH_METERS = 65535 / DEPTH_UNITS_PER_METER


def write_rgb(path, rgb: np.ndarray) -> None:
    """Write an H x W x 3 float image in [0, 1] as 8-bit PNG."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected H x W x 3 rgb array, got {rgb.shape}")
    data = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def read_rgb(path) -> np.ndarray:
    """Read an 8-bit PNG into an H x W x 3 float array in [0, 1]."""
    with Image.open(path) as im:
        data = np.asarray(im.convert("RGB"), dtype=np.float64)
    return data / 255.0


def write_depth(path, depth: np.ndarray, valid: np.ndarray | None = None) -> None:
    """Write a metric depth map as 16-bit millimeter PNG (0 = invalid).

    Pixels where ``valid`` is False, where depth is nonpositive, or where
    depth exceeds the representable 65.535 m are stored as 0.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError(f"expected H x W depth array, got {depth.shape}")
    mm = np.round(depth * DEPTH_UNITS_PER_METER)
    ok = np.isfinite(mm) & (mm >= 1) & (mm <= 65535)
    if valid is not None:
        ok &= np.asarray(valid, dtype=bool)
    data = np.where(ok, mm, 0.0).astype(np.uint16)
    Image.fromarray(data).save(path, format="PNG")


def read_depth(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a 16-bit millimeter PNG; returns (depth_meters, valid)."""
    with Image.open(path) as im:
        data = np.asarray(im, dtype=np.uint16)
    if data.ndim != 2:
        raise ValueError(f"expected single-channel depth PNG, got shape {data.shape}")
    valid = data > 0
    return data.astype(np.float64) / DEPTH_UNITS_PER_METER, valid


def read_depth_units(path, units_per_meter: float) -> tuple[np.ndarray, np.ndarray]:
    """Read a 16-bit depth PNG under a caller-specified scale.

    Used for foreign files (e.g. relative monocular depth) whose sidecar
    declares a unit other than the native millimeter.
    """
    if units_per_meter <= 0:
        raise ValueError("units_per_meter must be positive")
    with Image.open(path) as im:
        data = np.asarray(im, dtype=np.uint16)
    if data.ndim != 2:
        raise ValueError(f"expected single-channel depth PNG, got shape {data.shape}")
    valid = data > 0
    return data.astype(np.float64) / units_per_meter, valid
