import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_fundus, random_volume
from octbench.augment import (
    PHOTOMETRIC_RANGES,
    PhotometricParams,
    collaborative_flip,
    photometric_augment,
    sample_photometric,
)
from octbench.errors import InvalidParams
from octbench.imaging import FundusImage, OctVolume

# Expected flip remapping: output slot <- (input frame, mirrored?)
FLIP_MAPPING = {0: (0, False), 1: (5, True), 2: (4, True), 3: (3, True), 4: (2, True), 5: (1, True)}


class TestCollaborativeFlip:
    def test_matches_reference_mapping(self, rng):
        fundus, vol = random_fundus(rng), random_volume(rng)
        f2, v2 = collaborative_flip(fundus, vol)
        assert np.array_equal(f2.pixels, fundus.pixels[:, ::-1])
        for slot, (src, mirrored) in FLIP_MAPPING.items():
            expected = vol[src].pixels[:, ::-1] if mirrored else vol[src].pixels
            assert np.array_equal(v2[slot].pixels, expected), slot

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 9))
    def test_involution(self, seed, h, w):
        rng = np.random.default_rng(seed)
        fundus, vol = random_fundus(rng, h, w), random_volume(rng, h, w)
        f2, v2 = collaborative_flip(*collaborative_flip(fundus, vol))
        assert f2 == fundus and v2 == vol

    def test_preserves_value_multisets(self, rng):
        fundus, vol = random_fundus(rng), random_volume(rng)
        f2, v2 = collaborative_flip(fundus, vol)
        assert sorted(f2.pixels.ravel()) == sorted(fundus.pixels.ravel())
        for slot, (src, _) in FLIP_MAPPING.items():
            assert np.array_equal(np.sort(v2[slot].pixels, axis=None), np.sort(vol[src].pixels, axis=None))

    def test_symmetric_frames_only_permuted(self, rng):
        base = rng.integers(0, 256, (6, 8, 5), dtype=np.uint8)
        sym = np.concatenate([base, base[:, :, ::-1]], axis=2)
        vol = OctVolume.from_array(sym)
        _, v2 = collaborative_flip(FundusImage(np.zeros((4, 4, 3), np.uint8)), vol)
        assert [v2[k] == vol[FLIP_MAPPING[k][0]] for k in range(6)] == [True] * 6


class TestPhotometric:
    def test_identity_params(self, rng):
        img = random_fundus(rng)
        assert photometric_augment(img, PhotometricParams()) == img

    def test_brightness_shift(self):
        img = FundusImage(np.full((16, 16, 3), 128, np.uint8))
        out = photometric_augment(img, PhotometricParams(brightness_delta=10.0))
        assert out.pixels.mean() == 138

    def test_brightness_clamps(self):
        img = FundusImage(np.full((4, 4, 3), 250, np.uint8))
        out = photometric_augment(img, PhotometricParams(brightness_delta=32.0))
        assert (out.pixels == 255).all()

    def test_saturation_keeps_gray(self):
        img = FundusImage(np.full((4, 4, 3), 90, np.uint8))
        assert photometric_augment(img, PhotometricParams(saturation_gain=1.2)) == img

    def test_gamma_closed_form(self):
        img = FundusImage(np.full((2, 2, 3), 64, np.uint8))
        out = photometric_augment(img, PhotometricParams(gamma=0.8))
        assert out.pixels[0, 0, 0] == int(np.floor(255 * (64 / 255) ** 0.8 + 0.5))

    def test_deterministic(self, rng):
        img = random_fundus(rng, 24, 24)
        p = sample_photometric(99)
        assert photometric_augment(img, p) == photometric_augment(img, p)

    def test_noise_depends_on_seed(self):
        img = FundusImage(np.full((16, 16, 3), 128, np.uint8))
        a = photometric_augment(img, PhotometricParams(noise_sigma=5.0, seed=1))
        b = photometric_augment(img, PhotometricParams(noise_sigma=5.0, seed=2))
        assert a != b

    @pytest.mark.parametrize("field,value", [("gamma", 2.0), ("blur_sigma", -0.1), ("contrast_gain", 0.5)])
    def test_out_of_range(self, field, value):
        with pytest.raises(InvalidParams):
            PhotometricParams(**{field: value})


class TestSamplePhotometric:
    def test_reproducible(self):
        assert sample_photometric(5) == sample_photometric(5)
        assert sample_photometric(5) != sample_photometric(6)

    def test_ranges(self):
        for seed in range(10_000):
            p = sample_photometric(seed)
            for name, (lo, hi) in PHOTOMETRIC_RANGES.items():
                assert lo <= getattr(p, name) <= hi

    def test_to_dict_round_trip(self):
        p = sample_photometric(3)
        assert PhotometricParams(**p.to_dict()) == p
