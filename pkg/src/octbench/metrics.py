"""Frame-level fidelity (PSNR, SSIM) and set-level Frechet video distance.

Pixel metrics are computed per B-scan and averaged over the six frames of a
volume. FVD fits a Gaussian to the embeddings of each set of volumes and
takes the Frechet distance between the two fits::

    d^2 = |mu_a - mu_b|^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a^1/2 S_b S_a^1/2)^1/2)

The embedder is pluggable. :func:`embed_volume` is a small deterministic
reference embedder; embeddings from a pretrained video network can be
imported with :func:`load_external_embeddings`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping

import cv2
import numpy as np

from .errors import (
    DimMismatch,
    DuplicateSampleId,
    EmbeddingParseError,
    InconsistentDim,
    NumericalFailure,
    TooFewSamples,
    TooSmall,
)
from .imaging import N_FRAMES, Frame, OctVolume

PSNR_CAP = 100.0
EMBED_GRID = 4
EMBED_DIM = N_FRAMES * EMBED_GRID * EMBED_GRID + (N_FRAMES - 1)


def _pixels(x) -> np.ndarray:
    return x.pixels if isinstance(x, Frame) else np.asarray(x)


# -- PSNR ---------------------------------------------------------------------

def psnr(frame_a, frame_b, max_val: float = 255.0, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB, capped at ``cap`` (also for MSE = 0)."""
    a = _pixels(frame_a)
    b = _pixels(frame_b)
    if a.shape != b.shape:
        raise DimMismatch(f"PSNR needs equal shapes, got {a.shape} and {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float(cap)
    return float(min(10.0 * math.log10(max_val * max_val / mse), cap))


# -- SSIM ---------------------------------------------------------------------

@dataclass(frozen=True)
class SsimParams:
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    window_size: int = 11
    sigma: float = 1.5

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @cached_property
    def kernel_1d(self) -> np.ndarray:
        """Normalized 1-d Gaussian taps; the 2-d window is their outer product."""
        r = (self.window_size - 1) / 2.0
        x = np.arange(self.window_size, dtype=np.float64) - r
        g = np.exp(-(x * x) / (2.0 * self.sigma * self.sigma))
        return g / g.sum()

    def window(self) -> np.ndarray:
        return np.outer(self.kernel_1d, self.kernel_1d)


DEFAULT_SSIM = SsimParams()


def _valid_filter(x: np.ndarray, taps: np.ndarray, margin: int) -> np.ndarray:
    # border mode is irrelevant: the margin that touches it is cropped away
    out = cv2.sepFilter2D(x, -1, taps, taps, borderType=cv2.BORDER_REPLICATE)
    return out[margin:x.shape[0] - margin, margin:x.shape[1] - margin]


def ssim_map(frame_a, frame_b, p: SsimParams = DEFAULT_SSIM) -> np.ndarray:
    """Local SSIM over the valid (unpadded) window positions."""
    a = _pixels(frame_a)
    b = _pixels(frame_b)
    if a.shape != b.shape:
        raise DimMismatch(f"SSIM needs equal shapes, got {a.shape} and {b.shape}")
    if a.ndim != 2:
        raise DimMismatch(f"SSIM works on single-channel frames, got shape {a.shape}")
    if min(a.shape) < p.window_size:
        raise TooSmall(f"frame {a.shape[1]}x{a.shape[0]} smaller than the {p.window_size}px window")

    taps = p.kernel_1d
    m = (p.window_size - 1) // 2
    fa = a.astype(np.float64)
    fb = b.astype(np.float64)
    mu_a = _valid_filter(fa, taps, m)
    mu_b = _valid_filter(fb, taps, m)
    var_a = _valid_filter(fa * fa, taps, m)
    var_b = _valid_filter(fb * fb, taps, m)
    cov = _valid_filter(np.multiply(fa, fb, out=fa), taps, m)

    # in place to keep temporaries down; the grouping makes num == den
    # bit-for-bit when the frames are identical
    mu_ab = mu_a * mu_b
    np.multiply(mu_a, mu_a, out=mu_a)
    np.multiply(mu_b, mu_b, out=mu_b)
    var_a -= mu_a
    var_b -= mu_b
    cov -= mu_ab
    num = np.multiply(mu_ab, 2.0, out=mu_ab)
    num += p.c1
    cov *= 2.0
    cov += p.c2
    num *= cov
    den = np.add(mu_a, mu_b, out=mu_a)
    den += p.c1
    var_a += var_b
    var_a += p.c2
    den *= var_a
    return np.divide(num, den, out=num)


def ssim(frame_a, frame_b, p: SsimParams = DEFAULT_SSIM) -> float:
    """Mean structural similarity, Gaussian-weighted 11x11 window by default."""
    return float(np.clip(ssim_map(frame_a, frame_b, p).mean(), -1.0, 1.0))


def volume_pixel_scores(pred: OctVolume, gt: OctVolume, p: SsimParams = DEFAULT_SSIM,
                        cap: float = PSNR_CAP) -> tuple[float, float]:
    """Mean per-frame ``(psnr, ssim)`` over the six B-scans."""
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise DimMismatch(
            f"volume size {pred.width}x{pred.height} does not match ground truth {gt.width}x{gt.height}")
    ps = [psnr(a, b, cap=cap) for a, b in zip(pred, gt)]
    ss = [ssim(a, b, p) for a, b in zip(pred, gt)]
    return math.fsum(ps) / N_FRAMES, math.fsum(ss) / N_FRAMES


# -- embeddings ---------------------------------------------------------------

def _cell_edges(n: int, cells: int) -> np.ndarray:
    return np.array([(i * n) // cells for i in range(cells)], dtype=np.intp)


def embed_volume(volume: OctVolume) -> np.ndarray:
    """Reference embedding, 101 dims.

    For each frame the mean intensity of a 4x4 grid of cells (96 values in
    ``[0, 1]``), followed by the mean absolute difference of each adjacent
    frame pair (5 values in ``[0, 1]``).
    """
    arr = volume.to_array()
    n, h, w = arr.shape
    if h < EMBED_GRID or w < EMBED_GRID:
        raise TooSmall(f"frames must be at least {EMBED_GRID}x{EMBED_GRID} to embed")
    rows = _cell_edges(h, EMBED_GRID)
    cols = _cell_edges(w, EMBED_GRID)
    sums = np.add.reduceat(np.add.reduceat(arr.astype(np.int64), rows, axis=1), cols, axis=2)
    heights = np.diff(np.append(rows, h))
    widths = np.diff(np.append(cols, w))
    pooled = sums / (heights[:, None] * widths[None, :]) / 255.0

    as16 = arr.astype(np.int16)
    motion = np.abs(np.diff(as16, axis=0)).reshape(n - 1, -1).mean(axis=1) / 255.0
    return np.concatenate([pooled.reshape(-1), motion])


@dataclass(frozen=True)
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def _as_matrix(embeddings) -> np.ndarray:
    if isinstance(embeddings, np.ndarray):
        x = embeddings
    else:
        rows = [np.asarray(e, dtype=np.float64).ravel() for e in embeddings]
        dims = {r.shape[0] for r in rows}
        if len(dims) > 1:
            raise DimMismatch(f"embeddings have differing dimensions {sorted(dims)}")
        x = np.array(rows) if rows else np.empty((0, 0))
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return x


def gaussian_stats(embeddings) -> GaussianStats:
    """Sample mean and unbiased (n - 1) covariance, symmetrized."""
    x = _as_matrix(embeddings)
    if x.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 embeddings, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("embeddings contain non-finite values")
    mu = x.mean(axis=0)
    xc = x - mu
    s = (xc.T @ xc) / (x.shape[0] - 1)
    return GaussianStats(mu, (s + s.T) / 2.0)


def _psd_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root through ``eigh``.

    When the spectrum dips below ``-1e-8 * |sigma|`` the matrix is regularized
    with ``eps * I``, ``eps = 1e-6 * trace / d``. Remaining eigenvalues below
    the round-off floor are treated as exact zeros.
    """
    d = sigma.shape[0]
    try:
        lam, vec = np.linalg.eigh(sigma)
        scale = float(np.max(np.abs(lam))) if d else 0.0
        if d and lam[0] < -1e-8 * scale:
            eps = 1e-6 * float(np.trace(sigma)) / d
            lam, vec = np.linalg.eigh(sigma + eps * np.eye(d))
            scale = float(np.max(np.abs(lam)))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    floor = max(d, 1) * np.finfo(np.float64).eps * scale
    root = np.sqrt(np.where(lam > floor, lam, 0.0))
    return (vec * root) @ vec.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet distance between two Gaussians, clamped to be non-negative.

    The cross term ``Tr((S_a^1/2 S_b S_a^1/2)^1/2)`` equals the sum of singular
    values of ``S_b^1/2 S_a^1/2``; computing it that way avoids square roots of
    the round-off eigenvalues that rank-deficient covariances produce.
    """
    if a.mu.shape != b.mu.shape or a.sigma.shape != b.sigma.shape:
        raise DimMismatch(f"dimension mismatch: {a.mu.shape[0]} vs {b.mu.shape[0]}")
    for s in (a.sigma, b.sigma):
        if not np.all(np.isfinite(s)):
            raise NumericalFailure("covariance contains non-finite values")
        if np.max(np.abs(s - s.T), initial=0.0) > 1e-9 * max(np.linalg.norm(s), 1e-300):
            raise ValueError("covariance matrix is not symmetric")

    root_a = _psd_sqrt(a.sigma)
    root_b = _psd_sqrt(b.sigma)
    try:
        cross = float(np.sum(np.linalg.svd(root_b @ root_a, compute_uv=False)))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD failed: {exc}") from exc
    # traces of the (possibly regularized) matrices actually square-rooted
    tr_a = float(np.sum(root_a * root_a))
    tr_b = float(np.sum(root_b * root_b))
    diff = a.mu - b.mu
    d2 = float(diff @ diff) + tr_a + tr_b - 2.0 * cross
    return max(d2, 0.0)


def canonical_order(x: np.ndarray) -> np.ndarray:
    """Rows sorted lexicographically, so reductions do not depend on set order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        return x
    return x[np.lexsort(x.T[::-1])]


def fvd_from_embeddings(pred_embeddings, gt_embeddings) -> float:
    """FVD between two embedding sets (sequences, arrays or id -> vector maps)."""
    if isinstance(pred_embeddings, Mapping):
        pred_embeddings = [pred_embeddings[k] for k in sorted(pred_embeddings)]
    if isinstance(gt_embeddings, Mapping):
        gt_embeddings = [gt_embeddings[k] for k in sorted(gt_embeddings)]
    p = canonical_order(_as_matrix(pred_embeddings))
    g = canonical_order(_as_matrix(gt_embeddings))
    if p.shape[0] < 2 or g.shape[0] < 2:
        raise TooFewSamples(f"FVD needs at least 2 volumes per set, got {p.shape[0]} and {g.shape[0]}")
    return frechet_distance(gaussian_stats(p), gaussian_stats(g))


def fvd(pred_set, gt_set, embedder: Callable[[OctVolume], np.ndarray] = embed_volume) -> float:
    """Set-level Frechet video distance between predicted and reference volumes.

    Either set may be a sequence of volumes or a ``sample_id -> volume``
    mapping. The result is bit-identical under any reordering or relabeling.
    """
    def embed_all(volumes):
        if isinstance(volumes, Mapping):
            volumes = [volumes[k] for k in sorted(volumes)]
        return [embedder(v) for v in volumes]

    return fvd_from_embeddings(embed_all(pred_set), embed_all(gt_set))


# -- embedding CSV --------------------------------------------------------------

def load_external_embeddings(path) -> dict[str, np.ndarray]:
    """Read ``sample_id,v0,...,v{d-1}`` rows into a ``sample_id -> vector`` map."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmbeddingParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header[0] != "sample_id" or header[1:] != [f"v{i}" for i in range(d)]:
        raise EmbeddingParseError(f"{path}: header must be sample_id,v0,...,v<d-1>")
    out: dict[str, np.ndarray] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) - 1 != d:
            raise InconsistentDim(f"{path}:{line}: expected {d} values, got {len(row) - 1}")
        sid = row[0].strip()
        if not sid:
            raise EmbeddingParseError(f"{path}:{line}: empty sample_id")
        if sid in out:
            raise DuplicateSampleId(f"{path}:{line}: duplicate sample id {sid!r}")
        try:
            vec = np.array([float(c) for c in row[1:]], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingParseError(f"{path}:{line}: {exc}") from None
        if not np.all(np.isfinite(vec)):
            raise EmbeddingParseError(f"{path}:{line}: non-finite value")
        out[sid] = vec
    return out


def embeddings_csv(embeddings: Mapping[str, np.ndarray]) -> str:
    """Serialize a ``sample_id -> vector`` map in the format read by :func:`load_external_embeddings`."""
    ids = sorted(embeddings)
    d = len(embeddings[ids[0]]) if ids else 0
    lines = [",".join(["sample_id"] + [f"v{i}" for i in range(d)])]
    for sid in ids:
        lines.append(",".join([_csv_field(sid)] + [repr(float(v)) for v in embeddings[sid]]))
    return "\n".join(lines) + "\n"


def write_embeddings(embeddings: Mapping[str, np.ndarray], path) -> None:
    Path(path).write_text(embeddings_csv(embeddings), encoding="utf-8")


# -- reports --------------------------------------------------------------------

REPORT_DECIMALS = 6


def _r(x: float) -> float:
    return round(float(x), REPORT_DECIMALS)


@dataclass(frozen=True)
class SampleScore:
    sample_id: str
    psnr: float
    ssim: float


@dataclass(frozen=True)
class MetricReport:
    submission_id: str
    fvd: float
    ssim_mean: float
    psnr_mean: float
    per_sample: tuple[SampleScore, ...] = ()

    def to_dict(self) -> dict:
        return {
            "submission_id": self.submission_id,
            "fvd": _r(self.fvd),
            "ssim_mean": _r(self.ssim_mean),
            "psnr_mean": _r(self.psnr_mean),
            "per_sample": [
                {"sample_id": s.sample_id, "psnr": _r(s.psnr), "ssim": _r(s.ssim)}
                for s in self.per_sample
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        try:
            per = tuple(SampleScore(str(s["sample_id"]), float(s["psnr"]), float(s["ssim"]))
                        for s in data.get("per_sample", []))
            return cls(str(data["submission_id"]), float(data["fvd"]),
                       float(data["ssim_mean"]), float(data["psnr_mean"]), per)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed metric report: {exc!r}") from None

    @classmethod
    def read_json(cls, path) -> "MetricReport":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValueError(f"{path}: report must be a JSON object")
        return cls.from_dict(data)

    def to_csv(self) -> str:
        """Flat form: one row per sample, summary columns repeated."""
        d = self.to_dict()
        lines = ["submission_id,fvd,ssim_mean,psnr_mean,sample_id,psnr,ssim"]
        head = f"{_csv_field(d['submission_id'])},{d['fvd']:.6f},{d['ssim_mean']:.6f},{d['psnr_mean']:.6f}"
        for s in d["per_sample"]:
            lines.append(f"{head},{_csv_field(s['sample_id'])},{s['psnr']:.6f},{s['ssim']:.6f}")
        return "\n".join(lines) + "\n"


def _csv_field(value: str) -> str:
    if any(c in value for c in ',"\n'):
        return '"' + value.replace('"', '""') + '"'
    return value
