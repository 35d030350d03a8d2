"""guidance-forge: point-cloud guidance images and RGB-D completion.

Lift registered RGB-D views into a world point cloud, reproject it into
sparse guidance images at novel poses, and complete those with an
adversarially trained encoder-decoder built on partial convolutions.
Supporting tools cover scale alignment of monocular depth, training-pair
selection, random masking, and free-space-checked trajectory perturbation.

The `neural` subpackage (the torch-backed model code) is imported lazily;
everything else is numpy.
"""

from .errors import CliError, NumericalError
from .geometry import (EQUIRECTANGULAR, PINHOLE, CameraModel, Pose,
                       ProjectionError, pixel_ray, project, project_point,
                       transform_points, unproject)
from .masking import PIXELS, RECTANGLES, random_mask
from .pointcloud import (GuidanceImage, GuidancePredictor, PointCloud,
                         RgbdFrame, RolloutResult, accumulate, lift_frame,
                         load_cloud, render_guidance, rollout, save_cloud)
from .depth_align import align_scale, coverage_filter, pair_selector
from .perturb import augment_trajectory, sample_perturbation
from .versions import (CHECKPOINT_FORMAT_VERSION, MANIFEST_SCHEMA_VERSION,
                       PACKAGE_VERSION)

__version__ = PACKAGE_VERSION

__all__ = [
    "CliError",
    "NumericalError",
    "EQUIRECTANGULAR",
    "PINHOLE",
    "CameraModel",
    "Pose",
    "ProjectionError",
    "pixel_ray",
    "project",
    "project_point",
    "transform_points",
    "unproject",
    "PIXELS",
    "RECTANGLES",
    "random_mask",
    "GuidanceImage",
    "GuidancePredictor",
    "PointCloud",
    "RgbdFrame",
    "RolloutResult",
    "accumulate",
    "lift_frame",
    "load_cloud",
    "render_guidance",
    "rollout",
    "save_cloud",
    "align_scale",
    "coverage_filter",
    "pair_selector",
    "augment_trajectory",
    "sample_perturbation",
    "CHECKPOINT_FORMAT_VERSION",
    "MANIFEST_SCHEMA_VERSION",
    "PACKAGE_VERSION",
    "__version__",
]
