"""Raster containers, lossless image IO and geometric primitives.

Frames are single-channel 8-bit B-scans, fundus images are 8-bit RGB.
Both wrap a read-only numpy array in row-major ``(height, width[, 3])``
layout, so they can be shared freely between threads and processes.

Conventions used throughout:

* bilinear sampling uses half-pixel centres, ``src = (dst + 0.5) * scale - 0.5``,
  clamped to the border;
* rounding back to 8-bit is ``floor(v + 0.5)`` (round half up), then clipped;
* rotation angles are degrees counter-clockwise as seen on screen (y points
  down in array coordinates), about ``((W - 1) / 2, (H - 1) / 2)``, with black fill.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimMismatch, ImageDecodeError, InvalidDimensions, OutOfBounds

__all__ = [
    "Frame",
    "FundusImage",
    "OctVolume",
    "N_FRAMES",
    "to_uint8",
    "luma",
    "load_image",
    "save_image",
    "mirror_horizontal",
    "resize_bilinear",
    "rotate_about_center",
    "crop_rect",
    "sample_bilinear",
]

N_FRAMES = 6

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Tolerance for treating a sample coordinate as on the border rather than
# outside it; absorbs sin/cos round-off (e.g. a 360 degree turn).
_EDGE_EPS = 1e-6


def to_uint8(values):
    """Round half up and clip to 0..255."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


class _Raster:
    __slots__ = ("pixels",)
    _ndim = 2

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values must lie in 0..255")
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValueError("pixel values must be integers")
            arr = arr.astype(np.uint8)
        self._check_shape(arr)
        arr = np.array(arr, dtype=np.uint8, copy=True, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def _check_shape(self, arr):
        if arr.ndim != self._ndim:
            raise InvalidDimensions(
                f"{type(self).__name__} needs a {self._ndim}-d array, got shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise InvalidDimensions(f"empty image of shape {arr.shape}")

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        """``(width, height)``."""
        return self.width, self.height

    def replace(self, pixels):
        """Return a new raster of the same type holding ``pixels``."""
        return type(self)(pixels)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}(width={self.width}, height={self.height})"


class Frame(_Raster):
    """One grayscale OCT B-scan, ``pixels`` of shape ``(height, width)``."""

    __slots__ = ()
    _ndim = 2


class FundusImage(_Raster):
    """RGB fundus photograph, ``pixels`` of shape ``(height, width, 3)``."""

    __slots__ = ()
    _ndim = 3

    def _check_shape(self, arr):
        super()._check_shape(arr)
        if arr.shape[2] != 3:
            raise InvalidDimensions(f"FundusImage needs 3 channels, got {arr.shape[2]}")


Raster = Union[Frame, FundusImage]


class OctVolume:
    """Exactly six directional B-scans sharing one size."""

    __slots__ = ("frames",)

    def __init__(self, frames: Sequence[Frame]):
        frames = tuple(f if isinstance(f, Frame) else Frame(f) for f in frames)
        if len(frames) != N_FRAMES:
            raise InvalidDimensions(f"an OCT volume has {N_FRAMES} frames, got {len(frames)}")
        sizes = {f.size for f in frames}
        if len(sizes) != 1:
            raise DimMismatch(f"frame sizes differ within volume: {sorted(sizes)}")
        object.__setattr__(self, "frames", frames)

    def __setattr__(self, name, value):
        raise AttributeError("OctVolume is immutable")

    @classmethod
    def from_array(cls, arr) -> "OctVolume":
        arr = np.asarray(arr)
        if arr.ndim != 3:
            raise InvalidDimensions(f"expected (6, H, W) array, got shape {arr.shape}")
        return cls([Frame(a) for a in arr])

    def to_array(self) -> np.ndarray:
        return np.stack([f.pixels for f in self.frames])

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def __len__(self):
        return N_FRAMES

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, k) -> Frame:
        return self.frames[k]

    def __eq__(self, other):
        if not isinstance(other, OctVolume):
            return NotImplemented
        return all(a == b for a, b in zip(self.frames, other.frames))

    __hash__ = None

    def __repr__(self):
        return f"OctVolume(width={self.width}, height={self.height})"


def luma(rgb) -> np.ndarray:
    """BT.601 luma of an ``(..., 3)`` uint8 array, rounded to uint8."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = LUMA_WEIGHTS
    return to_uint8(r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2])


def as_gray(img: Raster) -> np.ndarray:
    """uint8 ``(H, W)`` view of a frame or luma of a fundus image."""
    if isinstance(img, FundusImage):
        return luma(img.pixels)
    return img.pixels


def load_image(path, mode: str = "gray") -> Raster:
    """Read a PNG or JPG file.

    Args:
        path: image file.
        mode: ``"gray"`` returns a :class:`Frame` (RGB input is converted with
            rounded BT.601 luma), ``"rgb"`` returns a :class:`FundusImage`.

    Raises:
        FileNotFoundError: ``path`` does not exist.
        ImageDecodeError: the file is not a decodable PNG/JPG.
    """
    if mode not in ("gray", "rgb"):
        raise ValueError(f"mode must be 'gray' or 'rgb', got {mode!r}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ImageDecodeError(f"{path}: unsupported format {im.format}")
            im.load()
            if mode == "gray":
                if im.mode == "L":
                    return Frame(np.asarray(im))
                return Frame(luma(np.asarray(im.convert("RGB"))))
            return FundusImage(np.asarray(im.convert("RGB")))
    except (UnidentifiedImageError, SyntaxError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise ImageDecodeError(f"cannot decode {path}: {exc}") from exc


def save_image(img: Raster, path, compress_level: int = 1) -> None:
    """Write ``img`` as PNG. Lossless, so ``load_image`` returns identical pixels.

    ``compress_level`` only trades file size for speed.
    """
    Image.fromarray(np.ascontiguousarray(img.pixels)).save(
        Path(path), format="PNG", compress_level=compress_level)


def mirror_horizontal(img: Raster) -> Raster:
    return img.replace(img.pixels[:, ::-1])


def _source_coords(n_out: int, n_in: int) -> np.ndarray:
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    return np.clip(src, 0.0, n_in - 1)


def resize_bilinear(img: Raster, out_w: int, out_h: int) -> Raster:
    """Bilinear resize with half-pixel centres and border clamping."""
    if int(out_w) <= 0 or int(out_h) <= 0:
        raise InvalidDimensions(f"target size must be positive, got {out_w}x{out_h}")
    out_w, out_h = int(out_w), int(out_h)
    if (out_w, out_h) == img.size:
        return img
    src = img.pixels.astype(np.float64)

    xs = _source_coords(out_w, img.width)
    ys = _source_coords(out_h, img.height)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, img.width - 1)
    y1 = np.minimum(y0 + 1, img.height - 1)
    # weights broadcast over the trailing channel axis, if any
    wx = (xs - x0).reshape((-1,) + (1,) * (src.ndim - 2))
    wy = (ys - y0).reshape((-1,) + (1,) * (src.ndim - 1))

    rows = src[y0] * (1.0 - wy) + src[y1] * wy
    out = rows[:, x0] * (1.0 - wx) + rows[:, x1] * wx
    return img.replace(to_uint8(out))


def sample_bilinear(arr, xs, ys, fill: float = 0.0) -> np.ndarray:
    """Bilinearly sample a 2-d (or HxWxC) array at float coordinates.

    Points outside ``[0, W-1] x [0, H-1]`` (beyond a 1e-6 tolerance) take
    ``fill``. Returns float64 with the broadcast shape of ``xs``/``ys``
    (plus the channel axis, if any).
    """
    arr = np.asarray(arr, dtype=np.float64)
    h, w = arr.shape[:2]
    xs, ys = np.broadcast_arrays(np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64))
    inside = ((xs >= -_EDGE_EPS) & (xs <= w - 1 + _EDGE_EPS)
              & (ys >= -_EDGE_EPS) & (ys <= h - 1 + _EDGE_EPS))
    xc = np.clip(xs, 0.0, w - 1)
    yc = np.clip(ys, 0.0, h - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = xc - x0
    wy = yc - y0
    if arr.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
        inside_b = inside[..., None]
    else:
        inside_b = inside
    out = ((arr[y0, x0] * (1 - wx) + arr[y0, x1] * wx) * (1 - wy)
           + (arr[y1, x0] * (1 - wx) + arr[y1, x1] * wx) * wy)
    return np.where(inside_b, out, fill)


def _cos_sin_deg(theta: float) -> tuple[float, float]:
    # exact values on the quarter turns keep 90/180/270 rotations lossless
    q = theta / 90.0
    if q == round(q):
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[int(round(q)) % 4]
    rad = math.radians(theta)
    return math.cos(rad), math.sin(rad)


def rotate_about_center(img: Raster, theta: float) -> Raster:
    """Rotate ``theta`` degrees counter-clockwise about the image centre.

    Output keeps the input size; each output pixel is the bilinear sample at
    the inverse-rotated position, with 0 outside the source.
    """
    c, s = _cos_sin_deg(float(theta))
    if (c, s) == (1.0, 0.0):
        return img
    h, w = img.height, img.width
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dx = xx - cx
    dy = yy - cy
    # with y pointing down, an on-screen CCW turn sends (dx, dy) to
    # (c*dx + s*dy, -s*dx + c*dy); sample the inverse of that
    src_x = cx + c * dx - s * dy
    src_y = cy + s * dx + c * dy
    return img.replace(to_uint8(sample_bilinear(img.pixels, src_x, src_y, fill=0.0)))


def crop_rect(img: Raster, x0: int, y0: int, w: int, h: int) -> Raster:
    if w <= 0 or h <= 0:
        raise OutOfBounds(f"crop size must be positive, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > img.width or y0 + h > img.height:
        raise OutOfBounds(
            f"rectangle ({x0},{y0},{w},{h}) exceeds image {img.width}x{img.height}")
    return img.replace(img.pixels[y0:y0 + h, x0:x0 + w])
