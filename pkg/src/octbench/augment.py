"""Paired flip augmentation and seeded photometric jitter for fundus images."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidParams
from .imaging import N_FRAMES, LUMA_WEIGHTS, FundusImage, OctVolume, mirror_horizontal, to_uint8

# (low, high) for each sampled field
PHOTOMETRIC_RANGES = {
    "brightness_delta": (-32.0, 32.0),
    "contrast_gain": (0.8, 1.2),
    "saturation_gain": (0.8, 1.2),
    "gamma": (0.8, 1.25),
    "blur_sigma": (0.0, 1.5),
    "noise_sigma": (0.0, 8.0),
}


def collaborative_flip(fundus: FundusImage, volume: OctVolume) -> tuple[FundusImage, OctVolume]:
    """Mirror the fundus and remap the six B-scans consistently.

    Frame 0 is kept as is; frame k (k = 1..5) is mirrored and moved to slot
    ``6 - k``. Applying the flip twice restores the input exactly.
    """
    frames = [None] * N_FRAMES
    frames[0] = volume[0]
    for k in range(1, N_FRAMES):
        frames[N_FRAMES - k] = mirror_horizontal(volume[k])
    return mirror_horizontal(fundus), OctVolume(frames)


@dataclass(frozen=True)
class PhotometricParams:
    brightness_delta: float = 0.0
    contrast_gain: float = 1.0
    saturation_gain: float = 1.0
    gamma: float = 1.0
    blur_sigma: float = 0.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name, (lo, hi) in PHOTOMETRIC_RANGES.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise InvalidParams(f"{name}={v} outside [{lo}, {hi}]")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParams(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self) -> dict:
        return asdict(self)


def sample_photometric(seed: int) -> PhotometricParams:
    """Draw every ranged field uniformly from a generator seeded with ``seed``."""
    rng = np.random.default_rng(seed)
    values = {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in PHOTOMETRIC_RANGES.items()}
    return PhotometricParams(**values, seed=int(seed))


def photometric_augment(fundus: FundusImage, params: PhotometricParams) -> FundusImage:
    """Contrast, brightness, saturation, gamma, blur, then additive noise.

    Each stage clamps to 0..255 in float; the result is rounded once at the
    end. Noise comes from a generator seeded by ``params.seed`` only.
    """
    x = fundus.pixels.astype(np.float64)
    w = np.asarray(LUMA_WEIGHTS)

    if params.contrast_gain != 1.0:
        mean_luma = float((x @ w).mean())
        x = np.clip(mean_luma + params.contrast_gain * (x - mean_luma), 0, 255)
    if params.brightness_delta != 0.0:
        x = np.clip(x + params.brightness_delta, 0, 255)
    if params.saturation_gain != 1.0:
        y = (x @ w)[..., None]
        x = np.clip(y + params.saturation_gain * (x - y), 0, 255)
    if params.gamma != 1.0:
        x = 255.0 * (x / 255.0) ** params.gamma
    if params.blur_sigma > 0:
        x = ndimage.gaussian_filter(x, sigma=(params.blur_sigma, params.blur_sigma, 0), mode="nearest")
    if params.noise_sigma > 0:
        rng = np.random.default_rng(params.seed)
        x = np.clip(x + rng.normal(0.0, params.noise_sigma, size=x.shape), 0, 255)
    return fundus.replace(to_uint8(x))
