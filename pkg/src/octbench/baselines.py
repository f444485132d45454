"""Reference corruptions used as synthetic "predictions".

Two families: forward diffusion noising of the ground-truth B-scans after
``t`` steps of a linear-beta schedule, and a random zoom-in crop shared by
all six frames. Corrupted frames are re-quantized to 8 bit so they go through
exactly the same submission pipeline as real entries.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from ._parallel import pmap
from .dataset import Manifest, SubmissionSet, load_gt_volume, scan_submission
from .errors import ConfigError, InvalidScale, InvalidSteps
from .imaging import OctVolume, crop_rect, resize_bilinear, save_image, to_uint8

KINDS = ("gaussian_noise", "random_crop", "identity")


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear beta schedule; ``alpha_bar[0] == 1`` and ``alpha_bar[t] = prod_{s<=t}(1 - beta_s)``."""

    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def __post_init__(self):
        if self.T < 1 or not 0 < self.beta_start <= self.beta_end < 1:
            raise ConfigError(f"invalid noise schedule {self}")

    @cached_property
    def betas(self) -> np.ndarray:
        """``betas[t - 1]`` is beta_t for t = 1..T."""
        return np.linspace(self.beta_start, self.beta_end, self.T, dtype=np.float64)

    @cached_property
    def alpha_bar(self) -> np.ndarray:
        """Length ``T + 1``, indexed by step."""
        return np.concatenate([[1.0], np.cumprod(1.0 - self.betas)])


DEFAULT_SCHEDULE = NoiseSchedule()


def gaussian_noise_corrupt(volume: OctVolume, steps: int, schedule: NoiseSchedule = DEFAULT_SCHEDULE,
                           seed: int = 0) -> OctVolume:
    """Noise every frame to step ``steps``: ``x_t = sqrt(ab) x_0 + sqrt(1 - ab) eps``.

    Intensities are mapped to [-1, 1] first and back to 0..255 afterwards.
    """
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)) or not 0 <= steps <= schedule.T:
        raise InvalidSteps(f"steps must be an integer in 0..{schedule.T}, got {steps!r}")
    x0 = volume.to_array().astype(np.float64) / 127.5 - 1.0
    ab = float(schedule.alpha_bar[steps])
    eps = np.random.default_rng(seed).standard_normal(x0.shape)
    xt = math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps
    return OctVolume.from_array(to_uint8((xt + 1.0) * 127.5))


def crop_window(width: int, height: int, scale_lo: float, scale_hi: float, seed: int):
    """Draw the ``(x0, y0, w, h)`` rectangle used by :func:`random_crop_corrupt`."""
    if not 0 < scale_lo <= scale_hi <= 1:
        raise InvalidScale(f"need 0 < scale_lo <= scale_hi <= 1, got {scale_lo}, {scale_hi}")
    rng = np.random.default_rng(seed)
    s = float(rng.uniform(scale_lo, scale_hi)) if scale_hi > scale_lo else float(scale_lo)
    w = min(width, max(1, int(math.floor(s * width + 0.5))))
    h = min(height, max(1, int(math.floor(s * height + 0.5))))
    x0 = int(rng.integers(0, width - w + 1))
    y0 = int(rng.integers(0, height - h + 1))
    return x0, y0, w, h


def random_crop_corrupt(volume: OctVolume, scale_lo: float = 0.7, scale_hi: float = 0.9,
                        seed: int = 0) -> OctVolume:
    """Crop one random side-scaled rectangle from all frames and resize back."""
    x0, y0, w, h = crop_window(volume.width, volume.height, scale_lo, scale_hi, seed)
    return OctVolume([
        resize_bilinear(crop_rect(f, x0, y0, w, h), volume.width, volume.height) for f in volume
    ])


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str = "identity"
    steps: int = 0
    scale_lo: float = 0.7
    scale_hi: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown corruption kind {self.kind!r}; expected one of {KINDS}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.kind == "gaussian_noise" and not 0 <= self.steps <= DEFAULT_SCHEDULE.T:
            raise InvalidSteps(f"steps must be in 0..{DEFAULT_SCHEDULE.T}, got {self.steps}")
        if self.kind == "random_crop" and not 0 < self.scale_lo <= self.scale_hi <= 1:
            raise InvalidScale(f"need 0 < scale_lo <= scale_hi <= 1, got {self.scale_lo}, {self.scale_hi}")

    @property
    def label(self) -> str:
        if self.kind == "gaussian_noise":
            return f"gaussian_noise(steps={self.steps})"
        if self.kind == "random_crop":
            return f"random_crop(scale={self.scale_lo:g}-{self.scale_hi:g})"
        return "identity"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CorruptionSpec":
        unknown = set(data) - {"kind", "steps", "scale_lo", "scale_hi", "seed"}
        if unknown:
            raise ConfigError(f"unknown corruption field(s): {sorted(unknown)}")
        return cls(**data)

    def apply(self, volume: OctVolume, seed: int, schedule: NoiseSchedule = DEFAULT_SCHEDULE) -> OctVolume:
        if self.kind == "gaussian_noise":
            return gaussian_noise_corrupt(volume, self.steps, schedule, seed)
        if self.kind == "random_crop":
            return random_crop_corrupt(volume, self.scale_lo, self.scale_hi, seed)
        return volume


def derive_seed(seed: int, sample_id: str) -> int:
    """64-bit per-sample seed; independent of processing order."""
    digest = hashlib.sha256(f"{int(seed)}:{sample_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _corrupt_one(job) -> str:
    manifest, sample_id, spec, out_dir = job
    volume = load_gt_volume(manifest, sample_id)
    out = spec.apply(volume, derive_seed(spec.seed, sample_id))
    target = Path(out_dir) / sample_id
    target.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(out):
        save_image(frame, target / f"{k}.png")
    return sample_id


def generate_baseline_submission(manifest: Manifest, split: str, spec: CorruptionSpec, out_dir,
                                 workers: int | None = 1,
                                 sample_ids: Iterable[str] | None = None) -> SubmissionSet:
    """Write a corrupted copy of every ground-truth volume of ``split``.

    ``sample_ids`` fixes the processing order (default: sorted split ids); the
    written bytes do not depend on it or on ``workers``.
    """
    ids = manifest.sample_ids(split)
    order = list(sample_ids) if sample_ids is not None else ids
    if sorted(order) != ids:
        raise ConfigError("sample_ids must be a permutation of the split's sample ids")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pmap(_corrupt_one, [(manifest, sid, spec, str(out_dir)) for sid in order], workers)
    return scan_submission(out_dir, ids, submission_id=spec.label)
