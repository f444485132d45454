"""Command-line interface.

Subcommands: validate, preprocess, augment, corrupt, embed, evaluate, rank.
Exit codes: 0 success, 1 invalid submission or bad data, 2 usage error.
Diagnostics go to stderr; machine output to ``--out`` or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .augment import collaborative_flip, photometric_augment, sample_photometric
from .baselines import KINDS, CorruptionSpec, generate_baseline_submission
from .config import EmbedderConfig, RunConfig, load_config
from .dataset import Manifest, load_gt_volume, load_sample, load_volume, parse_manifest, scan_submission
from .errors import ConfigError, IncompleteSubmission, OctBenchError
from .harness import evaluate, leaderboard_csv, rank
from .imaging import load_image, resize_bilinear, save_image
from .metrics import MetricReport, embed_volume, embeddings_csv
from .preprocess import (
    DirectionModel,
    RulerRegion,
    crop_black_border,
    direction_view,
    extract_sequences,
    mask_central_roi,
    orient_for_direction,
    remove_ruler,
    truncate_normalize,
)

log = logging.getLogger("octbench")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _manifest(path) -> Manifest:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.csv"
    if not p.is_file():
        raise UsageError(f"dataset manifest not found: {p}")
    return parse_manifest(p)


def _existing_dir(path) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"directory not found: {p}")
    return p


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "split", None):
        cfg = replace(cfg, split=args.split)
    return cfg


# -- subcommands -------------------------------------------------------------------

def cmd_validate(args) -> int:
    manifest = _manifest(args.dataset)
    sub = _existing_dir(args.submission)
    try:
        subset = scan_submission(sub, manifest.sample_ids(args.split))
    except IncompleteSubmission as exc:
        print(f"INVALID: {len(exc.defects)} defect(s)", file=sys.stderr)
        for d in exc.defects:
            print(d, file=sys.stderr)
        return EXIT_INVALID
    _emit(json.dumps({"valid": True, "submission_id": subset.submission_id, "n_samples": len(subset),
                      "extra_samples": list(subset.extra_ids)}, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _config(args).preprocess
    model = DirectionModel()
    op = args.op
    rgb_ops = {"border-crop", "mask-roi", "orient", "direction-view", "sequences"}
    img = load_image(args.input, mode="rgb" if op in rgb_ops else "gray")

    if op == "border-crop":
        out = crop_black_border(img, cfg.border_tau)
        if not args.no_resize:
            out = resize_bilinear(out, *cfg.fundus_size)
    elif op == "remove-ruler":
        region = RulerRegion(*cfg.ruler) if cfg.ruler else RulerRegion.bottom_left(img, *cfg.ruler_size)
        out = remove_ruler(img, region)
    elif op == "truncate":
        np.save(args.out, truncate_normalize(img, cfg.trunc_lo, cfg.trunc_hi))
        return EXIT_OK
    elif op == "mask-roi":
        out = mask_central_roi(img, cfg.keep_v, cfg.keep_h)
    elif op in ("orient", "direction-view"):
        if args.direction is None:
            raise UsageError(f"--direction is required for {op}")
        if op == "orient":
            out = orient_for_direction(img, args.direction, model)
        else:
            out = direction_view(img, args.direction, model, cfg.keep_v, cfg.keep_h, cfg.direction_view_size)
    else:  # sequences
        if img.size != tuple(cfg.sequence_input_size):
            img = resize_bilinear(img, *cfg.sequence_input_size)
        np.save(args.out, extract_sequences(img, model, cfg.sequence_radius))
        return EXIT_OK
    save_image(out, args.out)
    return EXIT_OK


def cmd_augment(args) -> int:
    manifest = _manifest(args.dataset)
    sample = load_sample(manifest, args.sample)
    fundus, volume = sample.fundus, sample.volume
    if args.flip:
        fundus, volume = collaborative_flip(fundus, volume)
    info = {"sample_id": sample.sample_id, "flip": bool(args.flip)}
    if args.photometric_seed is not None:
        params = sample_photometric(args.photometric_seed)
        fundus = photometric_augment(fundus, params)
        info["photometric"] = params.to_dict()
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "oct" / sample.sample_id).mkdir(parents=True, exist_ok=True)
    save_image(fundus, out / "images" / f"{sample.sample_id}.png")
    for k, frame in enumerate(volume):
        save_image(frame, out / "oct" / sample.sample_id / f"{k}.png")
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_corrupt(args) -> int:
    manifest = _manifest(args.dataset)
    spec = CorruptionSpec(kind=args.kind, steps=args.steps, scale_lo=args.scale_lo,
                          scale_hi=args.scale_hi, seed=args.seed)
    subset = generate_baseline_submission(manifest, args.split, spec, args.out, workers=args.workers)
    log.info("wrote %d corrupted volumes (%s) to %s", len(subset), spec.label, args.out)
    return EXIT_OK


def cmd_embed(args) -> int:
    manifest = _manifest(args.dataset)
    ids = manifest.sample_ids(args.split)
    if args.submission:
        subset = scan_submission(_existing_dir(args.submission), ids)
        table = {sid: embed_volume(load_volume(subset.volume_dir(sid), sid)) for sid in ids}
    else:
        table = {sid: embed_volume(load_gt_volume(manifest, sid)) for sid in ids}
    _emit(embeddings_csv(table), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = _manifest(args.dataset)
    sub = _existing_dir(args.submission)
    cfg = _config(args)
    if args.embeddings_pred or args.embeddings_gt:
        if not (args.embeddings_pred and args.embeddings_gt):
            raise UsageError("--embeddings-pred and --embeddings-gt must be given together")
        cfg = replace(cfg, embedder=EmbedderConfig("external", Path(args.embeddings_pred), Path(args.embeddings_gt)))
    try:
        report = evaluate(manifest, cfg.split, sub, cfg, submission_id=args.submission_id,
                          workers=args.workers)
    except IncompleteSubmission as exc:
        print(f"INVALID: {len(exc.defects)} defect(s)", file=sys.stderr)
        for d in exc.defects:
            print(d, file=sys.stderr)
        return EXIT_INVALID
    fmt = args.format or ("csv" if str(args.out or "").endswith(".csv") else "json")
    _emit(report.to_csv() if fmt == "csv" else report.to_json(), args.out)
    log.info("%s: fvd=%.6f ssim=%.6f psnr=%.6f", report.submission_id, report.fvd,
             report.ssim_mean, report.psnr_mean)
    return EXIT_OK


def cmd_rank(args) -> int:
    reports = []
    for path in args.reports:
        if not Path(path).is_file():
            raise UsageError(f"report not found: {path}")
        reports.append(MetricReport.read_json(path))
    _emit(leaderboard_csv(rank(reports)), args.out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="octbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def dataset_args(p, split=True):
        p.add_argument("--dataset", required=True, help="dataset root (with manifest.csv) or manifest path")
        if split:
            p.add_argument("--split", default="final_test", choices=("train", "prelim_test", "final_test"))

    p = sub.add_parser("validate", help="check a submission for completeness")
    dataset_args(p)
    p.add_argument("--submission", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("preprocess", help="apply one preprocessing step to an image")
    p.add_argument("--op", required=True, choices=("border-crop", "remove-ruler", "truncate", "mask-roi",
                                                  "orient", "direction-view", "sequences"))
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="PNG output, or .npy for truncate/sequences")
    p.add_argument("--direction", type=int, help="scan direction 0..5 (orient, direction-view)")
    p.add_argument("--no-resize", action="store_true", help="border-crop: skip the resize to fundus_size")
    p.add_argument("--config")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("augment", help="augment one paired sample")
    dataset_args(p, split=False)
    p.add_argument("--sample", required=True)
    p.add_argument("--flip", action="store_true", help="collaborative fundus/OCT flip")
    p.add_argument("--photometric-seed", type=int)
    p.add_argument("--out", required=True, help="output root (images/ and oct/ are created)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("corrupt", help="write a corruption-baseline submission")
    dataset_args(p)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--steps", type=int, default=0)
    p.add_argument("--scale-lo", type=float, default=0.7)
    p.add_argument("--scale-hi", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("embed", help="write reference embeddings as CSV")
    dataset_args(p)
    p.add_argument("--submission", help="embed this submission instead of the ground truth")
    p.add_argument("--out")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", help="score a submission")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("train", "prelim_test", "final_test"))
    p.add_argument("--submission", required=True)
    p.add_argument("--submission-id")
    p.add_argument("--config")
    p.add_argument("--embeddings-pred")
    p.add_argument("--embeddings-gt")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="FVD-ranked leaderboard from report files")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)
    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IncompleteSubmission as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except (OctBenchError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(cli_main())
