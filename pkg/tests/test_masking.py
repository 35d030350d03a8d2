import numpy as np
import pytest

from guidance_forge.masking import PIXELS, RECTANGLES, random_mask
from guidance_forge.pointcloud import GuidanceImage


def masked_fraction(before: GuidanceImage, after: GuidanceImage) -> float:
    return float((before.valid & ~after.valid).mean())


class TestBasics:
    def test_zero_fraction_is_identity(self, dense_guidance):
        out = random_mask(dense_guidance, rng_seed=1, max_fraction=0.0)
        assert np.array_equal(out.rgb, dense_guidance.rgb)
        assert np.array_equal(out.depth, dense_guidance.depth)
        assert np.array_equal(out.valid, dense_guidance.valid)

    def test_fully_invalid_stays_invalid(self):
        g = GuidanceImage(np.zeros((16, 32, 3)), np.zeros((16, 32)),
                          np.zeros((16, 32), dtype=bool))
        out = random_mask(g, rng_seed=2)
        assert not out.valid.any()

    def test_same_seed_bit_identical(self, dense_guidance):
        a = random_mask(dense_guidance, rng_seed=33)
        b = random_mask(dense_guidance, rng_seed=33)
        assert np.array_equal(a.rgb, b.rgb)
        assert np.array_equal(a.depth, b.depth)
        assert np.array_equal(a.valid, b.valid)

    def test_different_seeds_differ(self, dense_guidance):
        a = random_mask(dense_guidance, rng_seed=1)
        b = random_mask(dense_guidance, rng_seed=2)
        assert not np.array_equal(a.valid, b.valid)

    def test_masking_never_creates_validity(self, dense_guidance):
        sparse_valid = dense_guidance.valid.copy()
        sparse_valid[::3, ::2] = False
        g = GuidanceImage(np.where(sparse_valid[..., None],
                                   dense_guidance.rgb, 0.0),
                          np.where(sparse_valid, dense_guidance.depth, 0.0),
                          sparse_valid)
        out = random_mask(g, rng_seed=5)
        assert not (out.valid & ~g.valid).any()

    def test_masked_pixels_fully_zeroed(self, dense_guidance):
        out = random_mask(dense_guidance, rng_seed=7)
        knocked = dense_guidance.valid & ~out.valid
        assert knocked.any()
        assert not out.rgb[knocked].any()
        assert not out.depth[knocked].any()

    def test_unmasked_pixels_bit_identical(self, dense_guidance):
        out = random_mask(dense_guidance, rng_seed=8)
        kept = out.valid
        assert np.array_equal(out.rgb[kept], dense_guidance.rgb[kept])
        assert np.array_equal(out.depth[kept], dense_guidance.depth[kept])

    def test_rejects_bad_arguments(self, dense_guidance):
        with pytest.raises(ValueError):
            random_mask(dense_guidance, 1, max_fraction=1.5)
        with pytest.raises(ValueError):
            random_mask(dense_guidance, 1, max_fraction=-0.1)
        with pytest.raises(ValueError):
            random_mask(dense_guidance, 1, mode="circles")


class TestPixelsMode:
    def test_exact_count(self, dense_guidance):
        h, w = dense_guidance.valid.shape
        out = random_mask(dense_guidance, rng_seed=11, mode=PIXELS)
        # the target fraction is the seed's first uniform draw
        target = np.random.default_rng(11).uniform(0.0, 0.75)
        assert (~out.valid).sum() == int(np.ceil(target * h * w))

    def test_deterministic(self, dense_guidance):
        a = random_mask(dense_guidance, rng_seed=12, mode=PIXELS)
        b = random_mask(dense_guidance, rng_seed=12, mode=PIXELS)
        assert np.array_equal(a.valid, b.valid)


class TestFractionStatistics:
    def test_bound_and_mean_over_many_draws(self, dense_guidance):
        fractions = [masked_fraction(dense_guidance,
                                     random_mask(dense_guidance, seed))
                     for seed in range(2000)]
        fractions = np.asarray(fractions)
        assert fractions.max() <= 0.80
        assert 0.30 <= fractions.mean() <= 0.45

    def test_reaches_target_fraction(self, dense_guidance):
        for seed in range(50):
            target = np.random.default_rng(seed).uniform(0.0, 0.75)
            out = random_mask(dense_guidance, seed)
            assert masked_fraction(dense_guidance, out) >= target - 1e-12
