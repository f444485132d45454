"""Submission scoring and the FVD-ranked leaderboard."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._parallel import pmap
from .config import RunConfig
from .dataset import Manifest, load_gt_volume, load_volume, scan_submission
from .errors import DuplicateSubmissionId, EmbeddingParseError, EmptyInput
from .metrics import (
    MetricReport,
    SampleScore,
    embed_volume,
    fvd_from_embeddings,
    load_external_embeddings,
    volume_pixel_scores,
)

LEADERBOARD_COLUMNS = ("rank", "submission_id", "fvd", "ssim_mean", "psnr_mean")


def _score_one(job):
    manifest, sample_id, sub_dir, ssim_params, cap, embed = job
    gt = load_gt_volume(manifest, sample_id)
    pred = load_volume(Path(sub_dir) / sample_id, sample_id)
    p, s = volume_pixel_scores(pred, gt, ssim_params, cap)
    if embed:
        return sample_id, p, s, embed_volume(pred), embed_volume(gt)
    return sample_id, p, s, None, None


def _external(path, ids, which):
    table = load_external_embeddings(path)
    missing = [i for i in ids if i not in table]
    if missing:
        raise EmbeddingParseError(
            f"{which} embeddings {path} lack {len(missing)} sample(s): {', '.join(missing[:5])}")
    return {i: table[i] for i in ids}


def evaluate(manifest: Manifest, split: str, submission_dir, config: RunConfig | None = None,
             submission_id: str | None = None, workers: int | None = None) -> MetricReport:
    """Score one submission against the ground truth of ``split``.

    The submission must be complete (else :class:`IncompleteSubmission` and no
    report). Per-sample PSNR/SSIM are six-frame means; FVD is computed once
    over the whole split. Results do not depend on ``workers``.
    """
    config = config or RunConfig(split=split)
    ids = manifest.sample_ids(split)
    subset = scan_submission(submission_dir, ids, submission_id)
    use_reference = config.embedder.kind == "reference"
    if workers is None:
        workers = config.workers
    jobs = [(manifest, sid, str(subset.root), config.ssim, config.psnr_cap, use_reference) for sid in ids]
    rows = pmap(_score_one, jobs, workers)

    if use_reference:
        pred_emb = {sid: ep for sid, _, _, ep, _ in rows}
        gt_emb = {sid: eg for sid, _, _, _, eg in rows}
    else:
        pred_emb = _external(config.embedder.pred, ids, "prediction")
        gt_emb = _external(config.embedder.gt, ids, "ground-truth")
    fvd_value = fvd_from_embeddings(pred_emb, gt_emb)

    per_sample = tuple(SampleScore(sid, p, s) for sid, p, s, _, _ in rows)
    return MetricReport(
        submission_id=subset.submission_id,
        fvd=fvd_value,
        ssim_mean=math.fsum(s.ssim for s in per_sample) / len(per_sample),
        psnr_mean=math.fsum(s.psnr for s in per_sample) / len(per_sample),
        per_sample=per_sample,
    )


@dataclass(frozen=True)
class LeaderboardEntry:
    rank: int
    submission_id: str
    fvd: float
    ssim_mean: float
    psnr_mean: float


def rank(reports: Sequence[MetricReport]) -> list[LeaderboardEntry]:
    """Order by FVD (lower is better).

    Only exact FVD ties fall through to SSIM (higher first), then PSNR (higher
    first), then submission id.
    """
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports to rank")
    seen = set()
    for r in reports:
        if r.submission_id in seen:
            raise DuplicateSubmissionId(f"submission id {r.submission_id!r} appears more than once")
        seen.add(r.submission_id)
        if not all(np.isfinite([r.fvd, r.ssim_mean, r.psnr_mean])):
            raise ValueError(f"report {r.submission_id!r} has non-finite metrics")
    ordered = sorted(reports, key=lambda r: (r.fvd, -r.ssim_mean, -r.psnr_mean, r.submission_id))
    return [LeaderboardEntry(i, r.submission_id, r.fvd, r.ssim_mean, r.psnr_mean)
            for i, r in enumerate(ordered, start=1)]


def leaderboard_csv(entries: Sequence[LeaderboardEntry]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEADERBOARD_COLUMNS)
    for e in entries:
        w.writerow([e.rank, e.submission_id, f"{e.fvd:.6f}", f"{e.ssim_mean:.6f}", f"{e.psnr_mean:.6f}"])
    return buf.getvalue()
