"""Random masking for completion training.

A completion model should not only learn to fill reprojection gaps; at
train time extra holes are punched into the guidance so the generator
sees a wider range of missing-data patterns.  Two flavors: rectangles
(camera-frustum-shaped dropouts) and independent per-pixel dropout.
"""

from pathlib import Path

from guidance_forge import CameraModel, PIXELS, RECTANGLES, random_mask
from guidance_forge.pngio import write_rgb
from guidance_forge.synthetic import (RoomScene, pinhole_pose_from_yaw,
                                      render_room_frame)
from guidance_forge.pointcloud import GuidanceImage

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

scene = RoomScene()
camera = CameraModel.pinhole(96, 96, fx=60.0, fy=60.0, cx=47.5, cy=47.5)
frame = render_room_frame(scene, pinhole_pose_from_yaw(0.0, (0, 0, 0)), camera)

# a dense frame doubles as a fully valid guidance image
full = GuidanceImage(rgb=frame.rgb, depth=frame.depth, valid=frame.valid)

print(f"{'mode':<12} {'requested':>9} {'removed':>8}")
for mode in (RECTANGLES, PIXELS):
    for max_fraction in (0.25, 0.5, 0.75):
        masked = random_mask(full, rng_seed=7, max_fraction=max_fraction,
                             mode=mode)
        removed = 1.0 - masked.valid.mean()
        print(f"{mode:<12} {max_fraction:>9.2f} {removed:>8.1%}")
        if max_fraction == 0.5:
            write_rgb(out / f"masked_{mode}.png", masked.rgb * masked.valid[..., None])

# identical seeds must give identical masks: augmentation stays replayable
a = random_mask(full, rng_seed=123, max_fraction=0.6)
b = random_mask(full, rng_seed=123, max_fraction=0.6)
assert (a.valid == b.valid).all()
print("seed 123 twice: identical masks, as advertised")
print(f"wrote masked_rectangles.png / masked_pixels.png to {out}/")
