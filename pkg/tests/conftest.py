import numpy as np
import pytest

from guidance_forge.geometry import CameraModel
from guidance_forge.pointcloud import GuidanceImage


@pytest.fixture(scope="session")
def equirect_camera() -> CameraModel:
    return CameraModel.equirectangular(128, 64)


@pytest.fixture(scope="session")
def pinhole_camera() -> CameraModel:
    return CameraModel.pinhole(64, 48, fx=40.0, fy=40.0, cx=31.5, cy=23.5)


@pytest.fixture
def dense_guidance() -> GuidanceImage:
    """Fully valid guidance image with smooth nontrivial content."""
    h, w = 48, 96
    v, u = np.meshgrid(np.arange(h, dtype=np.float64),
                       np.arange(w, dtype=np.float64), indexing="ij")
    rgb = np.stack([np.sin(u / 9.0) * 0.4 + 0.5,
                    np.cos(v / 7.0) * 0.4 + 0.5,
                    np.sin((u + v) / 11.0) * 0.4 + 0.5], axis=-1)
    depth = 2.0 + np.sin(u / 13.0) + np.cos(v / 5.0) * 0.5
    valid = np.ones((h, w), dtype=bool)
    return GuidanceImage(rgb, depth, valid)
