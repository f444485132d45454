import json
import shutil

import numpy as np
import pytest

from octbench.cli import cli_main
from octbench.imaging import FundusImage, load_image, save_image


@pytest.fixture
def gt_copy(small_dataset, tmp_path):
    dst = tmp_path / "sub"
    shutil.copytree(small_dataset.root / "oct", dst)
    return dst


def run(capsys, *argv):
    code = cli_main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestValidate:
    def test_ok(self, capsys, small_dataset, gt_copy):
        code, out, _ = run(capsys, "validate", "--dataset", small_dataset.root, "--submission", gt_copy)
        assert code == 0
        assert json.loads(out) == {"valid": True, "submission_id": "sub", "n_samples": 10, "extra_samples": []}

    def test_missing_frames(self, capsys, small_dataset, gt_copy):
        (gt_copy / "S0001" / "0.png").unlink()
        (gt_copy / "S0001" / "5.png").unlink()
        code, out, err = run(capsys, "validate", "--dataset", small_dataset.root, "--submission", gt_copy)
        assert code == 1 and out == ""
        assert "S0001:frame0" in err and "S0001:frame5" in err


class TestEvaluateAndRank:
    def test_json_report(self, capsys, small_dataset, gt_copy, tmp_path):
        out_path = tmp_path / "r.json"
        code, _, _ = run(capsys, "evaluate", "--dataset", small_dataset.root, "--submission", gt_copy,
                         "--submission-id", "perfect", "--out", out_path)
        assert code == 0
        data = json.loads(out_path.read_text())
        assert set(data) == {"submission_id", "fvd", "ssim_mean", "psnr_mean", "per_sample"}
        assert data["submission_id"] == "perfect" and data["psnr_mean"] == 100.0 and data["fvd"] == 0.0
        assert len(data["per_sample"]) == 10

    def test_csv_stdout(self, capsys, small_dataset, gt_copy):
        code, out, _ = run(capsys, "evaluate", "--dataset", small_dataset.root, "--submission", gt_copy,
                           "--format", "csv")
        assert code == 0
        assert out.splitlines()[0] == "submission_id,fvd,ssim_mean,psnr_mean,sample_id,psnr,ssim"

    def test_embeddings_need_pair(self, capsys, small_dataset, gt_copy, tmp_path):
        code, _, err = run(capsys, "evaluate", "--dataset", small_dataset.root, "--submission", gt_copy,
                           "--embeddings-pred", tmp_path / "x.csv")
        assert code == 2 and "together" in err

    def test_corrupt_evaluate_rank(self, capsys, small_dataset, gt_copy, tmp_path):
        noisy = tmp_path / "noisy"
        assert run(capsys, "corrupt", "--dataset", small_dataset.root, "--kind", "gaussian_noise",
                   "--steps", "150", "--out", noisy)[0] == 0
        for name, sub in (("a", gt_copy), ("b", noisy)):
            assert run(capsys, "evaluate", "--dataset", small_dataset.root, "--submission", sub,
                       "--out", tmp_path / f"{name}.json")[0] == 0
        code, out, _ = run(capsys, "rank", tmp_path / "b.json", tmp_path / "a.json")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "rank,submission_id,fvd,ssim_mean,psnr_mean"
        assert lines[1].startswith("1,sub,0.000000,1.000000,100.000000")
        assert lines[2].startswith("2,noisy,")

    def test_rank_missing_report(self, capsys, tmp_path):
        assert run(capsys, "rank", tmp_path / "nope.json")[0] == 2

    def test_embed_round_trip(self, capsys, small_dataset, gt_copy, tmp_path):
        for name in ("p", "g"):
            assert run(capsys, "embed", "--dataset", small_dataset.root, "--out", tmp_path / f"{name}.csv")[0] == 0
        code, out, _ = run(capsys, "evaluate", "--dataset", small_dataset.root, "--submission", gt_copy,
                           "--embeddings-pred", tmp_path / "p.csv", "--embeddings-gt", tmp_path / "g.csv")
        assert code == 0 and json.loads(out)["fvd"] == 0.0


class TestPreprocessAndAugment:
    @pytest.fixture
    def fundus_png(self, tmp_path, rng):
        a = np.zeros((40, 50, 3), np.uint8)
        a[5:35, 8:44] = rng.integers(60, 256, (30, 36, 3), dtype=np.uint8)
        p = tmp_path / "f.png"
        save_image(FundusImage(a), p)
        return p

    def test_border_crop(self, capsys, fundus_png, tmp_path):
        out = tmp_path / "c.png"
        assert run(capsys, "preprocess", "--op", "border-crop", "--input", fundus_png, "--out", out)[0] == 0
        assert load_image(out, mode="rgb").size == (224, 224)
        assert run(capsys, "preprocess", "--op", "border-crop", "--no-resize", "--input", fundus_png,
                   "--out", out)[0] == 0
        assert load_image(out, mode="rgb").size == (36, 30)

    def test_sequences(self, capsys, fundus_png, tmp_path):
        out = tmp_path / "s.npy"
        assert run(capsys, "preprocess", "--op", "sequences", "--input", fundus_png, "--out", out)[0] == 0
        assert np.load(out).shape == (6, 8, 256)

    def test_orient_requires_direction(self, capsys, fundus_png, tmp_path):
        code, _, err = run(capsys, "preprocess", "--op", "orient", "--input", fundus_png, "--out", tmp_path / "o.png")
        assert code == 2 and "--direction" in err

    def test_bad_direction(self, capsys, fundus_png, tmp_path):
        code, _, _ = run(capsys, "preprocess", "--op", "orient", "--direction", "9", "--input", fundus_png,
                         "--out", tmp_path / "o.png")
        assert code == 1

    def test_augment(self, capsys, small_dataset, tmp_path):
        code, out, _ = run(capsys, "augment", "--dataset", small_dataset.root, "--sample", "S0002", "--flip",
                           "--photometric-seed", "4", "--out", tmp_path / "aug")
        assert code == 0
        info = json.loads(out)
        assert info["flip"] is True and info["photometric"]["seed"] == 4
        assert sorted(p.name for p in (tmp_path / "aug" / "oct" / "S0002").iterdir()) == [f"{k}.png" for k in range(6)]
        assert (tmp_path / "aug" / "images" / "S0002.png").is_file()


class TestUsage:
    def test_no_command(self, capsys):
        assert run(capsys)[0] == 2

    def test_unknown_flag(self, capsys):
        assert run(capsys, "rank", "--bogus")[0] == 2

    def test_missing_dataset(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", "--dataset", tmp_path, "--submission", tmp_path)
        assert code == 2 and "manifest" in err

    def test_bad_config(self, capsys, small_dataset, gt_copy, tmp_path):
        (tmp_path / "c.toml").write_text("nonsense = 1\n")
        code, _, _ = run(capsys, "evaluate", "--dataset", small_dataset.root, "--submission", gt_copy,
                         "--config", tmp_path / "c.toml")
        assert code == 2
