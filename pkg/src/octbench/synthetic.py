"""Synthetic paired data for tests, demos and throughput checks.

Volumes are smooth Gaussian random fields, correlated across the six frames,
with a per-volume signal level and structure contrast. Between-volume
variation is dominated by the level, as between real acquisitions. Fundus
images are a textured bright disc on black.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from ._parallel import pmap
from .dataset import PairingRecord, write_manifest
from .imaging import N_FRAMES, FundusImage, OctVolume, save_image, to_uint8


def smooth_random_volume(rng: np.random.Generator, height: int = 128, width: int = 128,
                         spatial_sigma: float = 6.0, frame_sigma: float = 1.0) -> OctVolume:
    noise = rng.standard_normal((N_FRAMES, height, width))
    field = ndimage.gaussian_filter(noise, sigma=(frame_sigma, spatial_sigma, spatial_sigma), mode="wrap")
    field = (field - field.mean()) / (field.std() + 1e-12)
    level = rng.uniform(70.0, 180.0)
    gain = rng.uniform(15.0, 25.0)
    return OctVolume.from_array(to_uint8(level + gain * field))


def smooth_random_fundus(rng: np.random.Generator, size: int = 64) -> FundusImage:
    yy, xx = np.mgrid[0:size, 0:size]
    c = (size - 1) / 2.0
    disc = np.hypot(xx - c, yy - c) <= 0.42 * size
    tex = ndimage.gaussian_filter(rng.standard_normal((size, size, 3)), sigma=(3, 3, 0))
    rgb = np.array([170.0, 90.0, 40.0]) + 25.0 * tex
    return FundusImage(np.where(disc[..., None], to_uint8(rgb), 0))


def _write_pair(job):
    root, sid, seed, height, width, fundus_size = job
    rng = np.random.default_rng(seed)
    vol = smooth_random_volume(rng, height, width)
    save_image(smooth_random_fundus(rng, fundus_size), Path(root) / "images" / f"{sid}.png")
    d = Path(root) / "oct" / sid
    d.mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(vol):
        save_image(f, d / f"{k}.png")
    return sid


def make_synthetic_dataset(root, n: int, split: str = "final_test", height: int = 128, width: int = 128,
                           seed: int = 0, fundus_size: int = 64, workers: int | None = 1) -> Path:
    """Write ``n`` synthetic pairs in the standard dataset layout; returns the manifest path."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "oct").mkdir(parents=True, exist_ok=True)
    ids = [f"S{i:04d}" for i in range(n)]
    seeds = np.random.SeedSequence(seed).spawn(n)
    jobs = [(str(root), sid, int(s.generate_state(1, np.uint64)[0]), height, width, fundus_size)
            for sid, s in zip(ids, seeds)]
    pmap(_write_pair, jobs, workers)
    records = [PairingRecord(sid, f"P{i:04d}", f"images/{sid}.png", f"oct/{sid}", split)
               for i, sid in enumerate(ids)]
    manifest_path = root / "manifest.csv"
    write_manifest(records, manifest_path)
    return manifest_path
