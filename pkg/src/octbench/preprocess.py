"""Fundus/OCT preprocessing used by the top challenge entries.

Covers black-border ROI cropping, ruler (equipment marker) removal,
intensity truncation, central-ROI masking, per-direction orientation of the
fundus and the six-direction band sampling used for sequence inputs.

Scan geometry: direction ``k`` runs at ``90 - 30*k`` degrees counter-clockwise
from the horizontal axis of the en-face image, so frame 0 is the vertical
scan, frame 3 the horizontal one, and a horizontal mirror maps direction k
onto direction ``(6 - k) % 6``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidDirection,
    InvalidFraction,
    InvalidRange,
    NoForeground,
    OutOfBounds,
    RegionSpansWidth,
    WrongInputSize,
)
from .imaging import (
    N_FRAMES,
    Frame,
    FundusImage,
    Raster,
    as_gray,
    crop_rect,
    resize_bilinear,
    rotate_about_center,
    sample_bilinear,
)

BORDER_TAU = 10
TRUNC_LO = 62
TRUNC_HI = 255
KEEP_V = 0.20
KEEP_H = 0.60
SEQUENCE_SIZE = 256
SEQUENCE_WIDTH = 8
SEQUENCE_RADIUS = 124.0


@dataclass(frozen=True)
class RulerRegion:
    x0: int
    y0: int
    w: int
    h: int

    @classmethod
    def bottom_left(cls, frame: Raster, w: int = 90, h: int = 40) -> "RulerRegion":
        """Marker rectangle anchored at the bottom-left corner of ``frame``."""
        w = min(w, frame.width)
        h = min(h, frame.height)
        return cls(0, frame.height - h, w, h)


@dataclass(frozen=True)
class DirectionModel:
    """Angles of the six radial B-scan directions."""

    start_deg: float = 90.0
    step_deg: float = 30.0

    def angle_of(self, k: int) -> float:
        _check_direction(k)
        return self.start_deg - self.step_deg * k

    def unit(self, k: int) -> tuple[float, float]:
        """Scan direction as ``(dx, dy)`` in array coordinates (y down)."""
        t = math.radians(self.angle_of(k))
        return math.cos(t), -math.sin(t)

    def normal(self, k: int) -> tuple[float, float]:
        # chosen so that mirroring flips the scan axis but not the normal
        t = math.radians(self.angle_of(k))
        return math.sin(t), math.cos(t)

    @staticmethod
    def mirror_index(k: int) -> int:
        _check_direction(k)
        return (N_FRAMES - k) % N_FRAMES


DIRECTIONS = DirectionModel()


def _check_direction(k) -> None:
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k < N_FRAMES:
        raise InvalidDirection(f"direction index must be an integer in 0..5, got {k!r}")


def crop_black_border(img: Raster, tau: int = BORDER_TAU) -> Raster:
    """Tight bounding box of the pixels whose gray level exceeds ``tau``.

    Resize afterwards if a fixed input size is needed (e.g. 224x224).
    """
    fg = as_gray(img) > tau
    if not fg.any():
        raise NoForeground(f"no pixel brighter than {tau}")
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    y0, y1 = rows[0], rows[-1] + 1
    x0, x1 = cols[0], cols[-1] + 1
    return crop_rect(img, int(x0), int(y0), int(x1 - x0), int(y1 - y0))


def remove_ruler(frame: Frame, region: RulerRegion) -> Frame:
    """Paint over a marker rectangle with the adjacent column.

    Each row of the region takes the value just right of it, or just left of
    it when the region touches the right edge.
    """
    x0, y0, w, h = region.x0, region.y0, region.w, region.h
    if w <= 0 or h <= 0 or x0 < 0 or y0 < 0 or x0 + w > frame.width or y0 + h > frame.height:
        raise OutOfBounds(f"ruler region {region} outside {frame.width}x{frame.height} frame")
    if w >= frame.width:
        raise RegionSpansWidth("ruler region covers the full frame width; no neighbour column")
    src_col = x0 + w if x0 + w < frame.width else x0 - 1
    out = frame.pixels.copy()
    out[y0:y0 + h, x0:x0 + w] = out[y0:y0 + h, src_col:src_col + 1]
    return frame.replace(out)


def truncate_normalize(frame: Frame, lo: float = TRUNC_LO, hi: float = TRUNC_HI) -> np.ndarray:
    """Clamp to ``[lo, hi]`` and rescale to ``[0, 1]`` (float64)."""
    if not lo < hi:
        raise InvalidRange(f"need lo < hi, got lo={lo}, hi={hi}")
    v = np.asarray(frame.pixels if isinstance(frame, Frame) else frame, dtype=np.float64)
    return (np.clip(v, lo, hi) - lo) / (hi - lo)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def central_roi_bounds(height: int, width: int, keep_v: float = KEEP_V, keep_h: float = KEEP_H):
    """Half-open ``(row0, row1, col0, col1)`` of the retained central window."""
    for name, f in (("keep_v", keep_v), ("keep_h", keep_h)):
        if not 0 < f <= 1:
            raise InvalidFraction(f"{name} must be in (0, 1], got {f}")
    r0 = _round_half_up(height * (1 - keep_v) / 2)
    r1 = _round_half_up(height * (1 + keep_v) / 2)
    c0 = _round_half_up(width * (1 - keep_h) / 2)
    c1 = _round_half_up(width * (1 + keep_h) / 2)
    return r0, r1, c0, c1


def mask_central_roi(img: Raster, keep_v: float = KEEP_V, keep_h: float = KEEP_H) -> Raster:
    """Zero everything outside the central ``keep_v`` rows x ``keep_h`` columns."""
    r0, r1, c0, c1 = central_roi_bounds(img.height, img.width, keep_v, keep_h)
    out = np.zeros_like(img.pixels)
    out[r0:r1, c0:c1] = img.pixels[r0:r1, c0:c1]
    return img.replace(out)


def orient_for_direction(img: Raster, k: int, model: DirectionModel = DIRECTIONS) -> Raster:
    """Rotate so that scan direction ``k`` becomes horizontal."""
    return rotate_about_center(img, -model.angle_of(k))


def direction_view(img: FundusImage, k: int, model: DirectionModel = DIRECTIONS,
                   keep_v: float = KEEP_V, keep_h: float = KEEP_H,
                   size: tuple[int, int] = (768, 496)) -> FundusImage:
    """Orient, mask to the central ROI and resize: one fundus view per B-scan."""
    view = mask_central_roi(orient_for_direction(img, k, model), keep_v, keep_h)
    return resize_bilinear(view, *size)


def extract_sequences(img: Raster, model: DirectionModel = DIRECTIONS,
                      radius: float = SEQUENCE_RADIUS) -> np.ndarray:
    """Sample an 8-pixel-wide band along each scan direction.

    ``img`` must be 256x256 (RGB input is converted to luma). Returns an array
    of shape ``(6, 8, 256)`` in ``[0, 1]``: index ``[k, j, i]`` is the bilinear
    sample at ``c + (2*i/255 - 1)*radius*u_k + (j - 3.5)*n_k``.
    """
    if img.size != (SEQUENCE_SIZE, SEQUENCE_SIZE):
        raise WrongInputSize(
            f"sequence extraction needs a {SEQUENCE_SIZE}x{SEQUENCE_SIZE} image, got {img.width}x{img.height}")
    gray = as_gray(img)
    cx = (img.width - 1) / 2.0
    cy = (img.height - 1) / 2.0
    along = (np.arange(SEQUENCE_SIZE) / (SEQUENCE_SIZE - 1) * 2.0 - 1.0) * radius
    across = np.arange(SEQUENCE_WIDTH) - (SEQUENCE_WIDTH - 1) / 2.0
    out = np.empty((N_FRAMES, SEQUENCE_WIDTH, SEQUENCE_SIZE))
    for k in range(N_FRAMES):
        ux, uy = model.unit(k)
        nx, ny = model.normal(k)
        xs = cx + along[None, :] * ux + across[:, None] * nx
        ys = cy + along[None, :] * uy + across[:, None] * ny
        out[k] = sample_bilinear(gray, xs, ys, fill=0.0)
    return out / 255.0
