"""Tests for the adversarial training loop and checkpoint container."""

import numpy as np
import pytest
import torch

from guidance_forge.errors import NumericalError
from guidance_forge.geometry import CameraModel
from guidance_forge.neural.checkpoint import (CheckpointError,
                                              load_checkpoint,
                                              save_checkpoint)
from guidance_forge.neural.discriminator import (Discriminator,
                                                 DiscriminatorConfig)
from guidance_forge.neural.generator import Generator, GeneratorConfig
from guidance_forge.neural.training import (TrainConfig, Trainer,
                                            TrainingPair)
from guidance_forge.pointcloud import accumulate, render_guidance
from guidance_forge.synthetic import (RoomScene, pinhole_pose_from_yaw,
                                      render_room_frame)

from _support import MICRO_DISCRIMINATOR, MICRO_GENERATOR


def micro_trainer(seed=0, **overrides):
    torch.manual_seed(seed)
    gen = Generator(GeneratorConfig(**MICRO_GENERATOR))
    disc = Discriminator(DiscriminatorConfig(**MICRO_DISCRIMINATOR))
    return Trainer(gen, disc, TrainConfig(**overrides), seed=seed)


def tiny_pair(size=32):
    cam = CameraModel.pinhole(size, size, fx=0.625 * size, fy=0.625 * size,
                              cx=(size - 1) / 2.0, cy=(size - 1) / 2.0)
    scene = RoomScene()
    ctx_pose = pinhole_pose_from_yaw(0.0, (0.0, 0.0, 0.0))
    tgt_pose = pinhole_pose_from_yaw(0.2, (0.15, 0.1, 0.0))
    ctx = render_room_frame(scene, ctx_pose, cam)
    guidance = render_guidance(accumulate([ctx]), tgt_pose, cam)
    target = render_room_frame(scene, tgt_pose, cam)
    return TrainingPair(guidance, target.rgb, target.depth)


class TestTrainStep:
    def test_history_keys_and_progress(self):
        tr = micro_trainer()
        history = tr.fit([tiny_pair()], steps=3)
        assert len(history) == 3
        assert tr.step_count == 3
        for i, record in enumerate(history):
            assert record["step"] == float(i + 1)
            for key in ("loss_g", "loss_d", "adv_g", "depth_l1"):
                assert np.isfinite(record[key])

    def test_seeded_runs_bit_identical(self):
        a = micro_trainer(seed=7)
        b = micro_trainer(seed=7)
        ha = a.fit([tiny_pair()], steps=3)
        hb = b.fit([tiny_pair()], steps=3)
        assert ha == hb
        for pa, pb in zip(a.generator.parameters(), b.generator.parameters()):
            assert torch.equal(pa, pb)
        for pa, pb in zip(a.discriminator.parameters(),
                          b.discriminator.parameters()):
            assert torch.equal(pa, pb)

    def test_discriminator_stepped_twice_per_generator_step(self):
        tr = micro_trainer()
        counts = {"d": 0, "g": 0}
        original_d, original_g = tr.opt_d.step, tr.opt_g.step

        def count_d(*args, **kwargs):
            counts["d"] += 1
            return original_d(*args, **kwargs)

        def count_g(*args, **kwargs):
            counts["g"] += 1
            return original_g(*args, **kwargs)

        tr.opt_d.step = count_d
        tr.opt_g.step = count_g
        tr.train_step([tiny_pair()])
        assert counts == {"d": 2, "g": 1}

    def test_non_finite_output_raises_before_updates(self):
        tr = micro_trainer()
        pair = tiny_pair()
        with torch.no_grad():
            first = next(tr.generator.parameters())
            first[...] = float("nan")
        disc_before = [p.clone() for p in tr.discriminator.parameters()]
        with pytest.raises(NumericalError):
            tr.train_step([pair])
        for before, after in zip(disc_before,
                                 tr.discriminator.parameters()):
            assert torch.equal(before, after)

    def test_ema_advances_with_training(self):
        tr = micro_trainer()
        gen = tr.generator
        name, shadow = next(iter(gen.ema_state().items()))
        start = shadow.clone()
        tr.fit([tiny_pair()], steps=2)
        assert not torch.equal(gen.ema_state()[name], start)

    def test_empty_pair_list_rejected(self):
        with pytest.raises(ValueError):
            micro_trainer().fit([], steps=1)

    def test_masking_changes_inputs_between_steps(self):
        # the same pair re-masks differently at each step, so two steps see
        # different guidance; with masking off they see identical tensors
        tr = micro_trainer(apply_masks=True, mask_max_fraction=0.75)
        pair = tiny_pair()
        x0, m0, _, _ = tr._batch_tensors([pair])
        tr.step_count = 1
        x1, m1, _, _ = tr._batch_tensors([pair])
        assert not torch.equal(m0, m1)
        off = micro_trainer(apply_masks=False)
        y0 = off._batch_tensors([pair])[0]
        off.step_count = 1
        y1 = off._batch_tensors([pair])[0]
        assert torch.equal(y0, y1)


class TestConfigValidation:
    def test_bad_configs_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(discriminator_steps=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)

    def test_training_pair_shapes_checked(self):
        pair = tiny_pair()
        with pytest.raises(ValueError):
            TrainingPair(pair.guidance, pair.target_rgb[:-1],
                         pair.target_depth)
        with pytest.raises(ValueError):
            TrainingPair(pair.guidance, pair.target_rgb,
                         pair.target_depth[:, :-1])


class TestCheckpoint:
    def test_round_trip_preserves_all_state(self, tmp_path):
        tr = micro_trainer(seed=3)
        tr.fit([tiny_pair()], steps=2)
        path = tmp_path / "state.ckpt"
        save_checkpoint(path, tr.generator, trainer=tr)
        bundle = load_checkpoint(path)
        assert bundle.trainer is not None
        assert bundle.trainer.step_count == 2
        assert bundle.trainer.seed == 3
        restored = bundle.generator.state_dict()
        for key, value in tr.generator.state_dict().items():
            assert torch.equal(restored[key], value), key
        restored_d = bundle.discriminator.state_dict()
        for key, value in tr.discriminator.state_dict().items():
            assert torch.equal(restored_d[key], value), key
        for opt_name in ("opt_g", "opt_d"):
            want = getattr(tr, opt_name).state_dict()["state"]
            got = getattr(bundle.trainer, opt_name).state_dict()["state"]
            assert want.keys() == got.keys()
            for idx in want:
                for key in want[idx]:
                    w, g = want[idx][key], got[idx][key]
                    if isinstance(w, torch.Tensor):
                        assert torch.equal(g, w)
                    else:
                        assert float(g) == float(w)

    def test_resaved_file_is_byte_identical(self, tmp_path):
        tr = micro_trainer(seed=5)
        tr.fit([tiny_pair()], steps=1)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, tr.generator, trainer=tr)
        bundle = load_checkpoint(p1)
        save_checkpoint(p2, bundle.generator, trainer=bundle.trainer)
        assert p1.read_bytes() == p2.read_bytes()

    def test_resume_equivalence(self, tmp_path):
        # train 4 straight vs train 2, checkpoint, reload, train 2 more:
        # identical weights either way
        pair = tiny_pair()
        straight = micro_trainer(seed=11)
        straight.fit([pair], steps=4)

        resumed = micro_trainer(seed=11)
        resumed.fit([pair], steps=2)
        path = tmp_path / "mid.ckpt"
        save_checkpoint(path, resumed.generator, trainer=resumed)
        bundle = load_checkpoint(path)
        bundle.trainer.fit([pair], steps=2)

        for pa, pb in zip(straight.generator.parameters(),
                          bundle.trainer.generator.parameters()):
            assert torch.equal(pa, pb)
        for pa, pb in zip(straight.discriminator.parameters(),
                          bundle.trainer.discriminator.parameters()):
            assert torch.equal(pa, pb)

    def test_generator_only_checkpoint(self, tmp_path):
        torch.manual_seed(2)
        gen = Generator(GeneratorConfig(**MICRO_GENERATOR))
        path = tmp_path / "gen.ckpt"
        save_checkpoint(path, gen)
        bundle = load_checkpoint(path)
        assert bundle.discriminator is None
        assert bundle.trainer is None
        restored = bundle.generator.state_dict()
        for key, value in gen.state_dict().items():
            assert torch.equal(restored[key], value)

    def test_malformed_files_rejected(self, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint at all")
        with pytest.raises(CheckpointError):
            load_checkpoint(bad)
        truncated = tmp_path / "trunc.ckpt"
        tr = micro_trainer()
        good = tmp_path / "good.ckpt"
        save_checkpoint(good, tr.generator)
        truncated.write_bytes(good.read_bytes()[:-100])
        with pytest.raises(CheckpointError):
            load_checkpoint(truncated)

    def test_extra_payload_round_trips(self, tmp_path):
        torch.manual_seed(1)
        gen = Generator(GeneratorConfig(**MICRO_GENERATOR))
        path = tmp_path / "extra.ckpt"
        save_checkpoint(path, gen, extra={"camera": "pinhole", "note": 7})
        bundle = load_checkpoint(path)
        assert bundle.extra == {"camera": "pinhole", "note": 7}
