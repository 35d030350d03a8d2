"""
Overfit a tiny completion GAN on one training pair
==================================================

Single scene, single pose pair, a few hundred optimizer steps.  Not a
useful model -- the point is to watch the depth L1 term collapse, which
is the fastest end-to-end sanity check of the generator, discriminator,
losses, and trainer wiring.  Takes a minute or two on one CPU core.
"""

import time
from pathlib import Path

import torch

from guidance_forge import CameraModel, accumulate, render_guidance
from guidance_forge.neural import (Discriminator, DiscriminatorConfig,
                                   Generator, GeneratorConfig, TrainConfig,
                                   Trainer, TrainingPair)
from guidance_forge.pngio import write_rgb
from guidance_forge.synthetic import (RoomScene, pinhole_pose_from_yaw,
                                      render_room_frame)

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
torch.set_num_threads(2)

scene = RoomScene()
camera = CameraModel.pinhole(32, 32, fx=20.0, fy=20.0, cx=15.5, cy=15.5)
ctx_pose = pinhole_pose_from_yaw(0.0, (0.0, 0.0, 0.0))
tgt_pose = pinhole_pose_from_yaw(0.2, (0.15, 0.1, 0.0))

context = render_room_frame(scene, ctx_pose, camera)
guidance = render_guidance(accumulate([context]), tgt_pose, camera)
target = render_room_frame(scene, tgt_pose, camera)
pair = TrainingPair(guidance, target.rgb, target.depth)

# small widths keep a CPU run honest; the full-size defaults train the
# same way, just slower
torch.manual_seed(0)
gen = Generator(GeneratorConfig(stage_widths=(8, 12, 16, 16),
                                bottleneck_depth=2, head_width=8))
disc = Discriminator(DiscriminatorConfig(base_width=8))
trainer = Trainer(gen, disc, TrainConfig(lr_generator=4e-4), seed=0)

steps = 300
t0 = time.time()
history = trainer.fit([pair], steps=steps, log_every=None)
dt = time.time() - t0

print(f"{'step':>5} {'depth L1 (m)':>13} {'G adv':>8} {'D':>8}")
for i in (0, 49, 99, 199, steps - 1):
    h = history[i]
    print(f"{i + 1:>5} {h['depth_l1']:>13.4f} {h['adv_g']:>8.3f} "
          f"{h['loss_d']:>8.3f}")
drop = history[0]["depth_l1"] / history[-1]["depth_l1"]
print(f"depth L1 dropped {drop:.1f}x over {steps} steps ({dt:.0f} s)")

rgb, depth = gen.predict(guidance)
write_rgb(out / "completion_input.png", guidance.rgb * guidance.valid[..., None])
write_rgb(out / "completion_output.png", rgb)
write_rgb(out / "completion_target.png", target.rgb)
print(f"wrote completion_input/output/target PNGs to {out}/")
