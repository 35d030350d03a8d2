"""
Guidance images from an accumulated point cloud
===============================================

Render two RGB-D views of a synthetic textured room, lift them into a
shared world-frame point cloud, and reproject that cloud into a pose
neither view was captured from.  The result is a sparse "guidance"
image: pixels the cloud can explain carry color and depth, the rest are
flagged invalid and left for a completion model.
"""

from pathlib import Path

import numpy as np

from guidance_forge import CameraModel, accumulate, render_guidance
from guidance_forge.pngio import write_depth, write_rgb
from guidance_forge.synthetic import (RoomScene, pinhole_pose_from_yaw,
                                      render_room_frame)

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

scene = RoomScene()
camera = CameraModel.pinhole(96, 96, fx=60.0, fy=60.0, cx=47.5, cy=47.5)

# two context captures, slightly rotated apart
poses = [
    pinhole_pose_from_yaw(0.0, (0.0, 0.0, 0.0)),
    pinhole_pose_from_yaw(0.35, (0.2, 0.15, 0.0)),
]
frames = [render_room_frame(scene, p, camera) for p in poses]
cloud = accumulate(frames)
print(f"accumulated {cloud.positions.shape[0]} points from {len(frames)} views")

# a novel pose between and above the captures
novel = pinhole_pose_from_yaw(0.18, (0.1, 0.08, 0.1))
guidance = render_guidance(cloud, novel, camera)

coverage = guidance.valid.mean()
print(f"novel-view coverage: {coverage:.1%} of pixels carry a sample")

# ground truth at the novel pose tells us how honest the reprojection is
truth = render_room_frame(scene, novel, camera)
err = np.abs(guidance.depth - truth.depth)[guidance.valid]
print(f"depth error on covered pixels: median {np.median(err)*1000:.1f} mm, "
      f"p95 {np.percentile(err, 95)*1000:.1f} mm")

write_rgb(out / "guidance_rgb.png", guidance.rgb)
write_depth(out / "guidance_depth.png", guidance.depth,
            valid=guidance.valid)
write_rgb(out / "novel_truth_rgb.png", truth.rgb)
print(f"wrote guidance_rgb/guidance_depth/novel_truth_rgb to {out}/")
