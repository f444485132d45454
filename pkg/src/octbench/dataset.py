"""Manifest parsing, sample loading and submission validation.

On-disk layout::

    <root>/manifest.csv                  sample_id,patient_id,fundus_path,oct_dir,split
    <root>/images/<sample_id>.jpg|png    fundus photograph
    <root>/oct/<sample_id>/<k>.png|jpg   B-scan k, k = 0..5

A submission mirrors the OCT part only: ``<subdir>/<sample_id>/<k>.png``.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath, PureWindowsPath
from typing import Iterable

from PIL import Image

from .errors import (
    DimMismatch,
    DuplicateSampleId,
    EmptyManifest,
    IncompleteSubmission,
    ManifestError,
    MissingColumn,
    MissingFrame,
    SplitLeak,
    UnknownSample,
)
from .imaging import N_FRAMES, FundusImage, OctVolume, load_image

log = logging.getLogger(__name__)

SPLITS = ("train", "prelim_test", "final_test")
MANIFEST_COLUMNS = ("sample_id", "patient_id", "fundus_path", "oct_dir", "split")
FRAME_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class PairingRecord:
    sample_id: str
    patient_id: str
    fundus_path: str
    oct_dir: str
    split: str


@dataclass(frozen=True)
class Manifest:
    records: tuple[PairingRecord, ...]
    root: Path
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {r.sample_id: r for r in self.records})

    def __len__(self):
        return len(self.records)

    def __contains__(self, sample_id):
        return sample_id in self._by_id

    def record(self, sample_id: str) -> PairingRecord:
        try:
            return self._by_id[sample_id]
        except KeyError:
            raise UnknownSample(f"unknown sample id {sample_id!r}") from None

    def split(self, name: str) -> list[PairingRecord]:
        if name not in SPLITS:
            raise ManifestError(f"unknown split {name!r}; expected one of {SPLITS}")
        return [r for r in self.records if r.split == name]

    def sample_ids(self, split: str) -> list[str]:
        return sorted(r.sample_id for r in self.split(split))

    def split_counts(self) -> dict[str, int]:
        counts = Counter(r.split for r in self.records)
        return {s: counts.get(s, 0) for s in SPLITS}

    def patient_counts(self) -> dict[str, int]:
        patients = defaultdict(set)
        for r in self.records:
            patients[r.split].add(r.patient_id)
        return {s: len(patients[s]) for s in SPLITS}


@dataclass(frozen=True)
class PairedSample:
    sample_id: str
    patient_id: str
    fundus: FundusImage
    volume: OctVolume


def _check_relative(value: str, column: str, line: int) -> None:
    for flavour in (PurePosixPath, PureWindowsPath):
        p = flavour(value)
        if p.is_absolute() or p.drive or p.root:
            raise ManifestError(f"line {line}: {column} must be a relative path, got {value!r}")
        if ".." in p.parts:
            raise ManifestError(f"line {line}: {column} must not traverse upwards: {value!r}")


def parse_manifest(csv_path, root=None) -> Manifest:
    """Read and validate a pairing manifest.

    ``root`` defaults to the directory holding the CSV. Rejects missing
    columns, blank fields, unknown splits, absolute or ``..`` paths,
    duplicate sample ids and patients that occur in more than one split.
    """
    csv_path = Path(csv_path)
    root = Path(root) if root is not None else csv_path.parent
    with open(csv_path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{csv_path}: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header

        records = []
        seen = {}
        for line, row in enumerate(reader, start=2):
            values = {c: (row.get(c) or "").strip() for c in MANIFEST_COLUMNS}
            blank = [c for c, v in values.items() if not v]
            if blank:
                raise ManifestError(f"line {line}: empty field(s) {', '.join(blank)}")
            if values["split"] not in SPLITS:
                raise ManifestError(
                    f"line {line}: unknown split {values['split']!r}; expected one of {SPLITS}")
            _check_relative(values["fundus_path"], "fundus_path", line)
            _check_relative(values["oct_dir"], "oct_dir", line)
            sid = values["sample_id"]
            if sid in seen:
                raise DuplicateSampleId(
                    f"line {line}: sample id {sid!r} already defined on line {seen[sid]}")
            seen[sid] = line
            records.append(PairingRecord(**values))

    if not records:
        raise EmptyManifest(f"{csv_path}: no data rows")

    splits_of = defaultdict(set)
    for r in records:
        splits_of[r.patient_id].add(r.split)
    leaks = {p: sorted(s) for p, s in splits_of.items() if len(s) > 1}
    if leaks:
        detail = ", ".join(f"{p} in {'/'.join(s)}" for p, s in sorted(leaks.items()))
        raise SplitLeak(f"patient-level split violated: {detail}")
    return Manifest(tuple(records), root)


def write_manifest(records: Iterable[PairingRecord], csv_path) -> None:
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            writer.writerow([getattr(r, c) for c in MANIFEST_COLUMNS])


def find_frame(directory: Path, k: int) -> Path | None:
    for suffix in FRAME_SUFFIXES:
        p = directory / f"{k}{suffix}"
        if p.is_file():
            return p
    return None


def load_volume(directory, sample_id: str = "") -> OctVolume:
    directory = Path(directory)
    frames = []
    for k in range(N_FRAMES):
        p = find_frame(directory, k)
        if p is None:
            raise MissingFrame(sample_id or str(directory), k)
        frames.append(load_image(p, mode="gray"))
    sizes = [f.size for f in frames]
    if len(set(sizes)) != 1:
        odd = [k for k, s in enumerate(sizes) if s != sizes[0]]
        raise DimMismatch(f"{sample_id or directory}: frame(s) {odd} differ in size from frame 0")
    return OctVolume(frames)


def load_sample(manifest: Manifest, sample_id: str) -> PairedSample:
    rec = manifest.record(sample_id)
    fundus = load_image(manifest.root / rec.fundus_path, mode="rgb")
    volume = load_volume(manifest.root / rec.oct_dir, sample_id)
    return PairedSample(rec.sample_id, rec.patient_id, fundus, volume)


def load_gt_volume(manifest: Manifest, sample_id: str) -> OctVolume:
    """Ground-truth OCT volume only, skipping the fundus decode."""
    rec = manifest.record(sample_id)
    return load_volume(manifest.root / rec.oct_dir, sample_id)


class SubmissionSet(Mapping):
    """Validated submission; maps sample id to :class:`OctVolume`.

    Volumes are decoded on access so large submissions are never held in
    memory at once. ``scan_submission`` has already checked that every frame
    exists and that frame sizes agree.
    """

    def __init__(self, submission_id: str, root, sample_ids: Iterable[str], extra_ids=()):
        self.submission_id = submission_id
        self.root = Path(root)
        self._ids = tuple(sorted(sample_ids))
        self.extra_ids = tuple(sorted(extra_ids))

    def __getitem__(self, sample_id) -> OctVolume:
        if sample_id not in self._ids:
            raise UnknownSample(f"{sample_id!r} not in submission {self.submission_id!r}")
        return load_volume(self.root / sample_id, sample_id)

    def __iter__(self):
        return iter(self._ids)

    def __len__(self):
        return len(self._ids)

    def volume_dir(self, sample_id: str) -> Path:
        return self.root / sample_id

    def __repr__(self):
        return f"SubmissionSet({self.submission_id!r}, {len(self)} volumes)"


def _frame_size(path: Path):
    try:
        with Image.open(path) as im:
            return im.size
    except Exception:
        return None


def scan_submission(directory, expected_ids: Iterable[str], submission_id: str | None = None) -> SubmissionSet:
    """Check a submission directory for completeness.

    Every expected id needs ``<dir>/<id>/<k>.png`` (or .jpg) for k = 0..5 with a
    readable header and one common frame size. All defects are collected and
    raised together as :class:`IncompleteSubmission`. Unknown extra sample
    directories are logged as warnings and otherwise ignored.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"submission directory not found: {directory}")
    expected = sorted(set(expected_ids))
    defects = []
    for sid in expected:
        sdir = directory / sid
        if not sdir.is_dir():
            defects.append(f"{sid}:missing")
            continue
        sizes = {}
        for k in range(N_FRAMES):
            p = find_frame(sdir, k)
            if p is None:
                defects.append(f"{sid}:frame{k}")
                continue
            size = _frame_size(p)
            if size is None:
                defects.append(f"{sid}:frame{k}:undecodable")
            else:
                sizes[k] = size
        if len(set(sizes.values())) > 1:
            ref = sizes[min(sizes)]
            odd = [k for k, s in sorted(sizes.items()) if s != ref]
            defects.append(f"{sid}:size_mismatch:frames{','.join(map(str, odd))}")
    if defects:
        raise IncompleteSubmission(defects)

    expected_set = set(expected)
    extra = sorted(p.name for p in directory.iterdir() if p.is_dir() and p.name not in expected_set)
    if extra:
        log.warning("submission %s has %d unexpected sample(s), ignored: %s",
                    directory, len(extra), ", ".join(extra[:10]))
    return SubmissionSet(submission_id or directory.name, directory, expected, extra)
