"""Tests for PNG round trips, depth conventions, and trajectory manifests."""

import json

import numpy as np
import pytest

from guidance_forge import pngio
from guidance_forge.geometry import CameraModel, pixel_ray
from guidance_forge.manifests import (NATIVE, PLANAR, RAY, FrameRecord,
                                      convert_depth, load_trajectory,
                                      read_manifest, save_trajectory,
                                      write_manifest)
from guidance_forge.pngio import DEPTH_UNITS_PER_METER, MAX_DEPTH_METERS

from _support import room_frames_equirect, room_frames_pinhole


class TestRgbPng:
    def test_quantized_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        rgb = rng.uniform(size=(12, 17, 3))
        path = tmp_path / "x.png"
        pngio.write_rgb(path, rgb)
        back = pngio.read_rgb(path)
        assert back.shape == rgb.shape
        assert np.abs(back - rgb).max() <= 0.5 / 255.0 + 1e-12

    def test_exact_at_eight_bit_values(self, tmp_path):
        # images already on the 8-bit lattice survive write/read bitwise
        rgb = np.arange(48, dtype=np.float64).reshape(4, 4, 3) / 255.0
        path = tmp_path / "x.png"
        pngio.write_rgb(path, rgb)
        np.testing.assert_array_equal(pngio.read_rgb(path), rgb)

    def test_shape_validated(self, tmp_path):
        with pytest.raises(ValueError):
            pngio.write_rgb(tmp_path / "x.png", np.zeros((4, 4)))


class TestDepthPng:
    def test_millimeter_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(1)
        depth = rng.uniform(0.05, 60.0, size=(9, 13))
        path = tmp_path / "d.png"
        pngio.write_depth(path, depth)
        back, valid = pngio.read_depth(path)
        assert valid.all()
        assert np.abs(back - depth).max() <= 0.5 / DEPTH_UNITS_PER_METER

    def test_exact_at_millimeter_values(self, tmp_path):
        depth = np.array([[0.001, 1.5], [65.535, 2.25]])
        path = tmp_path / "d.png"
        pngio.write_depth(path, depth)
        back, valid = pngio.read_depth(path)
        np.testing.assert_array_equal(back, depth)
        assert valid.all()

    def test_invalid_and_out_of_range_stored_as_zero(self, tmp_path):
        depth = np.array([[0.0, -1.0], [70.0, float("nan")],
                          [1.0, 2.0]])
        valid = np.array([[True, True], [True, True], [False, True]])
        path = tmp_path / "d.png"
        pngio.write_depth(path, depth, valid)
        back, back_valid = pngio.read_depth(path)
        want_valid = np.array([[False, False], [False, False],
                               [False, True]])
        np.testing.assert_array_equal(back_valid, want_valid)
        assert back[~want_valid].max() == 0.0
        assert back[2, 1] == 2.0
        assert MAX_DEPTH_METERS == 65.535

    def test_sub_millimeter_rounds_to_invalid(self, tmp_path):
        depth = np.full((2, 2), 0.0004)  # rounds to 0 mm
        path = tmp_path / "d.png"
        pngio.write_depth(path, depth)
        _, valid = pngio.read_depth(path)
        assert not valid.any()

    def test_read_depth_units_rescales(self, tmp_path):
        depth = np.array([[1.0, 2.5]])
        path = tmp_path / "d.png"
        pngio.write_depth(path, depth)
        # the file holds 1000/2500; read them back as centimeter units
        back, valid = pngio.read_depth_units(path, units_per_meter=100.0)
        np.testing.assert_allclose(back, [[10.0, 25.0]], atol=1e-12)
        assert valid.all()
        with pytest.raises(ValueError):
            pngio.read_depth_units(path, units_per_meter=0.0)


class TestDepthConventions:
    def test_native_passthrough(self):
        cam = CameraModel.pinhole(8, 6, fx=5.0, fy=5.0, cx=3.5, cy=2.5)
        depth = np.full((6, 8), 2.0)
        valid = np.ones((6, 8), dtype=bool)
        out, out_valid = convert_depth(depth, valid, cam, NATIVE)
        assert out is depth and out_valid is valid

    def test_pinhole_ray_to_z(self):
        cam = CameraModel.pinhole(8, 6, fx=5.0, fy=5.0, cx=3.5, cy=2.5)
        us, vs = np.meshgrid(np.arange(8.0), np.arange(6.0))
        dirs = pixel_ray(cam, us, vs)
        ray_depth = np.full((6, 8), 3.0)
        valid = np.ones((6, 8), dtype=bool)
        out, out_valid = convert_depth(ray_depth, valid, cam, RAY)
        np.testing.assert_allclose(out, 3.0 * dirs[..., 2], atol=1e-12)
        assert out_valid.all()

    def test_equirect_horizontal_range_to_ray(self):
        cam = CameraModel.equirectangular(16, 8)
        us, vs = np.meshgrid(np.arange(16.0), np.arange(8.0))
        dirs = pixel_ray(cam, us, vs)
        horizontal = np.hypot(dirs[..., 0], dirs[..., 1])
        planar = np.full((8, 16), 2.0)
        valid = np.ones((8, 16), dtype=bool)
        out, out_valid = convert_depth(planar, valid, cam, PLANAR)
        keep = horizontal > 1e-6
        np.testing.assert_allclose(out[keep], 2.0 / horizontal[keep],
                                   atol=1e-12)
        assert not out[~keep].any()
        np.testing.assert_array_equal(out_valid, valid & keep)

    def test_unsupported_combination_raises(self):
        cam = CameraModel.pinhole(4, 4, fx=2.0, fy=2.0, cx=1.5, cy=1.5)
        with pytest.raises(ValueError):
            convert_depth(np.ones((4, 4)), np.ones((4, 4), dtype=bool),
                          cam, "parallax")


class TestManifest:
    def test_record_round_trip(self, tmp_path):
        records = [FrameRecord("a_rgb.png", "a_d.png", "p0"),
                   FrameRecord("b_rgb.png", "b_d.png", "p1")]
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, records)
        assert read_manifest(path) == records

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        line = json.dumps({"rgb_path": "r.png", "depth_path": "d.png",
                           "pose_id": "0"})
        path.write_text(f"\n{line}\n\n")
        assert len(read_manifest(path)) == 1

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "manifest.jsonl"
        path.write_text('{"rgb_path": "r.png"}\n')
        with pytest.raises(ValueError, match=":1:"):
            read_manifest(path)


class TestTrajectoryRoundTrip:
    def test_pinhole_save_load(self, tmp_path):
        frames = room_frames_pinhole(3)
        save_trajectory(tmp_path, frames)
        back = load_trajectory(tmp_path / "manifest.jsonl")
        assert len(back) == 3
        for src, dst in zip(frames, back):
            assert dst.camera == src.camera
            np.testing.assert_allclose(dst.pose.rotation, src.pose.rotation,
                                       atol=1e-12)
            np.testing.assert_allclose(dst.pose.translation,
                                       src.pose.translation, atol=1e-12)
            assert np.abs(dst.rgb - src.rgb).max() <= 0.5 / 255.0 + 1e-12
            both = src.valid & dst.valid
            assert np.abs(dst.depth - src.depth)[both].max() <= 0.0005 + 1e-9

    def test_equirect_save_load(self, tmp_path):
        frames = room_frames_equirect(2)
        save_trajectory(tmp_path, frames)
        back = load_trajectory(tmp_path / "manifest.jsonl")
        assert back[0].camera.variant == frames[0].camera.variant
        both = frames[1].valid & back[1].valid
        assert np.abs(back[1].depth - frames[1].depth)[both].max() <= 0.0006

    def test_unknown_pose_id_rejected(self, tmp_path):
        frames = room_frames_pinhole(2)
        manifest = save_trajectory(tmp_path, frames)
        lines = manifest.read_text().splitlines()
        data = json.loads(lines[0])
        data["pose_id"] = "ghost"
        lines[0] = json.dumps(data)
        manifest.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="ghost"):
            load_trajectory(manifest)

    def test_empty_save_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_trajectory(tmp_path, [])

    def test_mixed_cameras_rejected(self, tmp_path):
        frames = room_frames_pinhole(2) + room_frames_equirect(1)
        with pytest.raises(ValueError):
            save_trajectory(tmp_path, frames)

    def test_load_with_ray_convention(self, tmp_path):
        # storing pinhole ray distance then declaring it at load time must
        # reproduce the native z-depth
        frames = room_frames_pinhole(1)
        frame = frames[0]
        cam = frame.camera
        us, vs = np.meshgrid(np.arange(cam.width, dtype=np.float64),
                             np.arange(cam.height, dtype=np.float64))
        dirs = pixel_ray(cam, us, vs)
        ray_depth = np.where(frame.valid, frame.depth / dirs[..., 2], 0.0)
        pngio.write_rgb(tmp_path / "f_rgb.png", frame.rgb)
        pngio.write_depth(tmp_path / "f_depth.png", ray_depth, frame.valid)
        from guidance_forge.geometry import save_camera, save_poses
        save_camera(cam, tmp_path / "camera.json")
        save_poses({"0": frame.pose}, tmp_path / "poses.json")
        write_manifest(tmp_path / "manifest.jsonl",
                       [FrameRecord("f_rgb.png", "f_depth.png", "0")])
        back = load_trajectory(tmp_path / "manifest.jsonl",
                               depth_convention=RAY)
        both = frame.valid & back[0].valid
        assert np.abs(back[0].depth - frame.depth)[both].max() <= 0.002
