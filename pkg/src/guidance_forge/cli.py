"""Command-line surface: seven batch subcommands around the library.

Every command is a thin wrapper over one library operation with disciplined
exit codes: 0 success, 1 parse or validation failure, 2 numerical failure.
Failures print one machine-readable JSON object to stderr.  All randomness
hangs off --seed; given identical inputs and seeds, outputs are
byte-identical.  Set GUIDANCE_FORGE_THREADS to pin torch's thread count for
bit-reproducible training across machines with different core counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import masking, pngio
from .depth_align import align_scale, coverage_filter
from .errors import CliError, NumericalError
from .geometry import Pose, load_camera, load_poses
from .manifests import NATIVE, PLANAR, RAY, load_trajectory
from .perturb import augment_trajectory, nearest_context_indices
from .pointcloud import (GuidanceImage, accumulate, load_cloud,
                         render_guidance, rollout, save_cloud)
from .versions import (CHECKPOINT_FORMAT_VERSION, MANIFEST_SCHEMA_VERSION,
                       PACKAGE_VERSION)

_VERSION_TEXT = (f"guidance-forge {PACKAGE_VERSION} "
                 f"(manifest schema {MANIFEST_SCHEMA_VERSION}, "
                 f"checkpoint format {CHECKPOINT_FORMAT_VERSION})")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so errors map to code 1."""

    def error(self, message):
        raise CliError(message)


def _pin_threads() -> None:
    env = os.environ.get("GUIDANCE_FORGE_THREADS")
    if not env:
        return
    try:
        count = int(env)
    except ValueError as exc:
        raise CliError(f"GUIDANCE_FORGE_THREADS={env!r} is not an integer") \
            from exc
    if count < 1:
        raise CliError("GUIDANCE_FORGE_THREADS must be >= 1")
    import torch
    torch.set_num_threads(count)
    try:
        torch.set_num_interop_threads(count)
    except RuntimeError:
        pass  # interop pool already started; intra-op pin still applies


def _print(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _ordered_poses(path, pose_ids: Optional[List[str]]) -> List[tuple]:
    poses = {str(k): v for k, v in load_poses(path).items()}
    if pose_ids:
        missing = [p for p in pose_ids if p not in poses]
        if missing:
            raise CliError(f"pose ids not in {path}: {missing}")
        return [(p, poses[p]) for p in pose_ids]
    return list(poses.items())


# --- subcommand handlers ---

def cmd_accumulate(args) -> int:
    frames = load_trajectory(args.manifest, poses_path=args.poses,
                             camera_path=args.camera,
                             depth_convention=args.depth_convention)
    cloud = accumulate(frames, voxel_size=args.voxel_size)
    save_cloud(args.output, cloud)
    _print({"command": "accumulate", "frames": len(frames),
            "points": len(cloud), "output": str(args.output)})
    return 0


def cmd_render(args) -> int:
    cloud = load_cloud(args.cloud)
    camera = load_camera(args.camera)
    targets = _ordered_poses(args.poses, args.pose_id)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for pose_id, pose in targets:
        guidance = render_guidance(cloud, pose, camera,
                                   splat_radius=args.splat_radius)
        pngio.write_rgb(out_dir / f"{pose_id}_rgb.png", guidance.rgb)
        pngio.write_depth(out_dir / f"{pose_id}_depth.png", guidance.depth,
                          guidance.valid)
    _print({"command": "render", "rendered": len(targets),
            "output_dir": str(out_dir)})
    return 0


def cmd_mask(args) -> int:
    rgb = pngio.read_rgb(args.rgb)
    depth, valid = pngio.read_depth(args.depth)
    guidance = GuidanceImage(rgb=rgb, depth=depth, valid=valid)
    masked = masking.random_mask(guidance, rng_seed=args.seed,
                                 max_fraction=args.max_fraction,
                                 mode=args.mask_mode)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pngio.write_rgb(out_dir / f"{args.prefix}_rgb.png", masked.rgb)
    pngio.write_depth(out_dir / f"{args.prefix}_depth.png", masked.depth,
                      masked.valid)
    _print({"command": "mask", "coverage_before": guidance.coverage,
            "coverage_after": masked.coverage, "output_dir": str(out_dir)})
    return 0


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from exc


def _build_training_pairs(frames, splat_radius: int, min_coverage: float):
    from .neural.training import TrainingPair
    if len(frames) < 2:
        raise CliError("training needs at least two frames")
    context_count = min(2, len(frames) - 1)
    centers = np.stack([f.pose.translation for f in frames])
    pairs = []
    for i, frame in enumerate(frames):
        ctx = nearest_context_indices(centers, i, count=context_count)
        cloud = accumulate([frames[j] for j in ctx])
        guidance = render_guidance(cloud, frame.pose, frame.camera,
                                   splat_radius=splat_radius)
        if not coverage_filter(guidance.valid, min_coverage):
            continue
        pairs.append(TrainingPair(guidance=guidance, target_rgb=frame.rgb,
                                  target_depth=frame.depth))
    if not pairs:
        raise CliError("no frame passed the guidance coverage filter")
    return pairs


def cmd_train(args) -> int:
    _pin_threads()
    import torch

    from .neural.checkpoint import (discriminator_config_from_dict,
                                    generator_config_from_dict,
                                    save_checkpoint, train_config_from_dict)
    from .neural.discriminator import Discriminator
    from .neural.generator import Generator
    from .neural.training import Trainer

    config = _load_json(args.config) if args.config else {}
    try:
        gen_cfg = generator_config_from_dict(config.get("generator", {}))
        dis_cfg = discriminator_config_from_dict(
            config.get("discriminator", {}))
        train_cfg = train_config_from_dict(config.get("train", {}))
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad config: {exc}") from exc
    steps = args.steps if args.steps is not None else config.get("steps", 100)
    splat_radius = int(config.get("splat_radius", 0))
    min_coverage = float(config.get("min_coverage", 0.10))

    manifest = Path(args.dataset) / "manifest.jsonl"
    frames = load_trajectory(manifest,
                             depth_convention=args.depth_convention)
    pairs = _build_training_pairs(frames, splat_radius, min_coverage)

    torch.manual_seed(args.seed)
    generator = Generator(gen_cfg)
    discriminator = Discriminator(dis_cfg)
    trainer = Trainer(generator, discriminator, train_cfg, seed=args.seed)
    history = trainer.fit(pairs, steps, log_every=args.log_every)
    save_checkpoint(args.output, generator, trainer=trainer)
    last = history[-1] if history else {}
    _print({"command": "train", "steps": len(history),
            "pairs": len(pairs), "output": str(args.output),
            "final": last})
    return 0


def cmd_rollout(args) -> int:
    _pin_threads()
    from .neural.checkpoint import load_checkpoint

    frames = load_trajectory(args.manifest,
                             depth_convention=args.depth_convention)
    bundle = load_checkpoint(args.checkpoint)
    targets = _ordered_poses(args.target_poses, args.pose_id)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = rollout(frames, [pose for _, pose in targets],
                     bundle.generator,
                     accumulate_predictions=not args.no_feedback,
                     depth_min=args.depth_min, depth_max=args.depth_max)
    for (pose_id, _), frame in zip(targets, result.frames):
        pngio.write_rgb(out_dir / f"{pose_id}_rgb.png", frame.rgb)
        pngio.write_depth(out_dir / f"{pose_id}_depth.png", frame.depth,
                          frame.valid)
    _print({"command": "rollout", "frames": len(result.frames),
            "output_dir": str(out_dir)})
    return 0


def cmd_align(args) -> int:
    units = args.dense_units_per_meter
    if units is None:
        sidecar = Path(str(args.dense) + ".json")
        if sidecar.exists():
            units = float(_load_json(sidecar).get(
                "units_per_meter", pngio.DEPTH_UNITS_PER_METER))
        else:
            units = pngio.DEPTH_UNITS_PER_METER
    dense, dense_valid = pngio.read_depth_units(args.dense, units)
    sparse, sparse_valid = pngio.read_depth(args.sparse)
    if dense.shape != sparse.shape:
        raise CliError(f"dense {dense.shape} and sparse {sparse.shape} "
                       f"images differ in size")
    valid = sparse_valid & dense_valid
    scale, aligned = align_scale(dense, sparse, valid,
                                 with_shift=args.with_shift)
    payload = {"command": "align"}
    if args.with_shift:
        payload["scale"], payload["shift"] = scale
    else:
        payload["scale"] = scale
    if args.output:
        keep = dense_valid & (aligned > 0)
        pngio.write_depth(args.output, np.where(keep, aligned, 0.0), keep)
        payload["output"] = str(args.output)
    _print(payload)
    return 0


def cmd_perturb(args) -> int:
    _pin_threads()
    from .manifests import save_trajectory
    from .neural.checkpoint import load_checkpoint

    frames = load_trajectory(args.manifest,
                             depth_convention=args.depth_convention)
    bundle = load_checkpoint(args.checkpoint)
    augmented = augment_trajectory(frames, bundle.generator, args.seed,
                                   horiz=args.horiz, vert=args.vert,
                                   max_tries=args.max_tries,
                                   splat_radius=args.splat_radius)
    manifest = save_trajectory(args.output_dir, augmented, prefix="aug")
    _print({"command": "perturb", "frames": len(augmented),
            "manifest": str(manifest)})
    return 0


# --- argument wiring ---

def _add_depth_convention(p) -> None:
    p.add_argument("--depth-convention", choices=[NATIVE, RAY, PLANAR],
                   default=NATIVE,
                   help="reinterpret depth PNGs at ingest (default: the "
                        "camera's native convention)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="guidance-forge",
                     description="Point-cloud guidance rendering and "
                                 "RGB-D completion tools")
    parser.add_argument("--version", action="version", version=_VERSION_TEXT)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("accumulate", help="fuse manifest frames into a "
                                          "point cloud file")
    p.add_argument("manifest")
    p.add_argument("--poses", default=None,
                   help="pose file (default: poses.json beside the manifest)")
    p.add_argument("--camera", default=None,
                   help="camera file (default: camera.json beside the "
                        "manifest)")
    p.add_argument("--voxel-size", type=float, default=None,
                   help="deduplicate points on a voxel grid (meters)")
    _add_depth_convention(p)
    p.add_argument("--output", required=True, help="output .npy cloud file")
    p.set_defaults(func=cmd_accumulate)

    p = sub.add_parser("render", help="reproject a cloud file to guidance "
                                      "PNGs at given poses")
    p.add_argument("cloud")
    p.add_argument("--camera", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--pose-id", action="append", default=None,
                   help="render only this pose id (repeatable; default all)")
    p.add_argument("--splat-radius", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("mask", help="randomly mask a guidance PNG pair")
    p.add_argument("rgb")
    p.add_argument("depth")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-fraction", type=float, default=0.75)
    p.add_argument("--mask-mode", choices=[masking.RECTANGLES,
                                           masking.PIXELS],
                   default=masking.RECTANGLES)
    p.add_argument("--prefix", default="masked")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("train", help="train the completion GAN on a "
                                     "trajectory directory")
    p.add_argument("dataset", help="directory holding manifest.jsonl, "
                                   "poses.json, camera.json and PNGs")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--steps", type=int, default=None,
                   help="override the config step count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=int, default=None)
    _add_depth_convention(p)
    p.add_argument("--output", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", help="synthesize frames at target poses "
                                       "from context frames")
    p.add_argument("manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--target-poses", required=True)
    p.add_argument("--pose-id", action="append", default=None)
    p.add_argument("--no-feedback", action="store_true",
                   help="do not lift predictions back into the cloud")
    p.add_argument("--depth-min", type=float, default=0.1)
    p.add_argument("--depth-max", type=float, default=20.0)
    _add_depth_convention(p)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("align", help="scale a relative depth PNG to sparse "
                                     "metric depth")
    p.add_argument("dense")
    p.add_argument("sparse")
    p.add_argument("--dense-units-per-meter", type=float, default=None,
                   help="dense PNG units (default: sidecar "
                        "<dense>.json, else millimeters)")
    p.add_argument("--with-shift", action="store_true",
                   help="fit scale and shift instead of scale only")
    p.add_argument("--output", default=None, help="write aligned depth PNG")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("perturb", help="re-synthesize a trajectory at "
                                       "perturbed poses")
    p.add_argument("manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--horiz", type=float, default=1.5)
    p.add_argument("--vert", type=float, default=0.1)
    p.add_argument("--max-tries", type=int, default=16)
    p.add_argument("--splat-radius", type=int, default=0)
    _add_depth_convention(p)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_perturb)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except NumericalError as exc:
        json.dump({"error": {"type": "numerical", "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2
    except (CliError, ValueError, OSError, KeyError) as exc:
        json.dump({"error": {"type": "validation", "message": str(exc)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
