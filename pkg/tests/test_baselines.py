import hashlib

import numpy as np
import pytest

from conftest import random_volume
from octbench.baselines import (
    DEFAULT_SCHEDULE,
    CorruptionSpec,
    NoiseSchedule,
    crop_window,
    derive_seed,
    gaussian_noise_corrupt,
    generate_baseline_submission,
    random_crop_corrupt,
)
from octbench.dataset import load_gt_volume
from octbench.errors import ConfigError, InvalidScale, InvalidSteps
from octbench.harness import evaluate
from octbench.imaging import OctVolume
from octbench.metrics import psnr


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*.png"))}


class TestSchedule:
    def test_alpha_bar_oracle(self):
        s = DEFAULT_SCHEDULE
        betas = [1e-4 + (0.02 - 1e-4) * i / 999 for i in range(1000)]
        for t in (1, 100, 150, 1000):
            prod = np.prod([1 - b for b in betas[:t]])
            assert s.alpha_bar[t] == pytest.approx(prod, rel=1e-12)
        assert s.alpha_bar[0] == 1.0 and len(s.alpha_bar) == 1001
        assert np.all(np.diff(s.alpha_bar) < 0)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            NoiseSchedule(beta_start=0.1, beta_end=0.01)


class TestGaussianNoise:
    def test_zero_steps_identity(self, rng):
        v = random_volume(rng)
        assert gaussian_noise_corrupt(v, 0, seed=5) == v

    def test_deterministic(self, rng):
        v = random_volume(rng)
        assert gaussian_noise_corrupt(v, 100, seed=3) == gaussian_noise_corrupt(v, 100, seed=3)
        assert gaussian_noise_corrupt(v, 100, seed=3) != gaussian_noise_corrupt(v, 100, seed=4)

    @pytest.mark.parametrize("t", [50, 100])
    def test_noise_variance(self, t):
        v = OctVolume.from_array(np.full((6, 420, 420), 128, np.uint8))  # > 1e6 pixels
        out = gaussian_noise_corrupt(v, t, seed=11).to_array() / 127.5 - 1.0
        ab = DEFAULT_SCHEDULE.alpha_bar[t]
        resid = out - np.sqrt(ab) * (128 / 127.5 - 1.0)
        assert resid.var() == pytest.approx(1 - ab, rel=0.05)
        assert abs(resid.mean()) < 0.01

    def test_psnr_decreases_with_steps(self, rng):
        v = OctVolume.from_array(rng.integers(60, 200, (6, 64, 64), dtype=np.uint8))
        scores = [np.mean([psnr(a, b) for a, b in zip(gaussian_noise_corrupt(v, t, seed=1), v)])
                  for t in (50, 100, 150, 300)]
        assert all(x > y for x, y in zip(scores, scores[1:]))

    @pytest.mark.parametrize("steps", [-1, 1001, 2.5, True])
    def test_invalid_steps(self, rng, steps):
        with pytest.raises(InvalidSteps):
            gaussian_noise_corrupt(random_volume(rng), steps)


class TestRandomCrop:
    def test_scale_one_identity(self, rng):
        v = random_volume(rng)
        assert random_crop_corrupt(v, 1.0, 1.0, seed=9) == v

    def test_dimensions_preserved(self, rng):
        v = random_volume(rng, 30, 50)
        out = random_crop_corrupt(v, seed=2)
        assert (out.width, out.height) == (50, 30)

    def test_constant_preserved(self):
        v = OctVolume.from_array(np.full((6, 20, 20), 77, np.uint8))
        assert random_crop_corrupt(v, seed=4) == v

    def test_window_bounds(self):
        for seed in range(200):
            x0, y0, w, h = crop_window(768, 496, 0.7, 0.9, seed)
            assert round(0.7 * 768) <= w <= round(0.9 * 768)
            assert abs(w / 768 - h / 496) < 0.01
            assert 0 <= x0 <= 768 - w and 0 <= y0 <= 496 - h

    def test_same_rectangle_on_all_frames(self, rng):
        frame = rng.integers(0, 256, (24, 24), dtype=np.uint8)
        v = OctVolume.from_array(np.stack([frame] * 6))
        out = random_crop_corrupt(v, seed=8)
        assert all(f == out[0] for f in out)

    def test_invalid_scale(self, rng):
        with pytest.raises(InvalidScale):
            random_crop_corrupt(random_volume(rng), 0.9, 0.7)


class TestSpec:
    def test_round_trip(self):
        s = CorruptionSpec("gaussian_noise", steps=150, seed=3)
        assert CorruptionSpec.from_dict(s.to_dict()) == s
        assert s.label == "gaussian_noise(steps=150)"

    def test_unknown(self):
        with pytest.raises(ConfigError):
            CorruptionSpec("blur")
        with pytest.raises(ConfigError):
            CorruptionSpec.from_dict({"kind": "identity", "strength": 2})

    def test_derive_seed(self):
        digest = hashlib.sha256(b"3:S0001").digest()
        assert derive_seed(3, "S0001") == int.from_bytes(digest[:8], "little")
        assert derive_seed(3, "S0001") != derive_seed(3, "S0002")


class TestGenerate:
    def test_serial_parallel_shuffled_identical(self, small_dataset, tmp_path):
        spec = CorruptionSpec("gaussian_noise", steps=100, seed=1)
        ids = small_dataset.sample_ids("final_test")
        generate_baseline_submission(small_dataset, "final_test", spec, tmp_path / "a", workers=1)
        generate_baseline_submission(small_dataset, "final_test", spec, tmp_path / "b", workers=2)
        shuffled = list(np.random.default_rng(0).permutation(ids))
        generate_baseline_submission(small_dataset, "final_test", spec, tmp_path / "c", workers=1,
                                     sample_ids=shuffled)
        a = tree_bytes(tmp_path / "a")
        assert len(a) == 6 * len(ids)
        assert a == tree_bytes(tmp_path / "b") == tree_bytes(tmp_path / "c")

    def test_matches_library_call(self, small_dataset, tmp_path):
        spec = CorruptionSpec("random_crop", seed=4)
        sub = generate_baseline_submission(small_dataset, "final_test", spec, tmp_path / "s")
        sid = small_dataset.sample_ids("final_test")[0]
        expected = random_crop_corrupt(load_gt_volume(small_dataset, sid), seed=derive_seed(4, sid))
        assert sub[sid] == expected
        assert sub.submission_id == spec.label

    def test_identity_scores_perfectly(self, small_dataset, tmp_path):
        generate_baseline_submission(small_dataset, "final_test", CorruptionSpec(), tmp_path / "id")
        report = evaluate(small_dataset, "final_test", tmp_path / "id")
        assert report.fvd <= 1e-9 and report.ssim_mean == 1.0 and report.psnr_mean == 100.0

    def test_bad_order(self, small_dataset, tmp_path):
        with pytest.raises(ConfigError):
            generate_baseline_submission(small_dataset, "final_test", CorruptionSpec(), tmp_path / "x",
                                         sample_ids=["S0000"])
