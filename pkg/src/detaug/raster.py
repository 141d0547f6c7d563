"""Image buffer, affine warping, and pixel-level primitives.

Everything in this module operates on 8-bit RGB rasters.  Buffers are
immutable after construction, so they can be shared freely across threads;
every operation returns a new buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# Fill used for pixels vacated by geometric transforms and for cutout patches.
GRAY: tuple[int, int, int] = (128, 128, 128)


class ImageBuffer:
    """An immutable height x width RGB image with 8-bit channels.

    Pixel (x, y) lives at ``pixels[y, x]``; ``pixels`` is a read-only
    ``uint8`` array of shape ``(height, width, 3)``.
    """

    __slots__ = ("_pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must have at least one pixel per axis")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 channels, got {arr.dtype}")
        arr = arr.copy()
        arr.setflags(write=False)
        self._pixels = arr

    @property
    def pixels(self) -> np.ndarray:
        return self._pixels

    @property
    def width(self) -> int:
        return self._pixels.shape[1]

    @property
    def height(self) -> int:
        return self._pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, color: tuple[int, int, int]) -> "ImageBuffer":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = color
        return cls(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return np.array_equal(self._pixels, other._pixels)

    def __hash__(self):  # immutable, but hashing full rasters is a mistake
        raise TypeError("ImageBuffer is not hashable")

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height})"


@dataclass(frozen=True)
class AffineMatrix:
    """Coefficients of the planar map (x, y) -> (a*x + b*y + c, d*x + e*y + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    def inverse(self) -> "AffineMatrix":
        det = self.determinant()
        if det == 0.0 or not math.isfinite(det):
            raise ValueError("affine matrix is not invertible")
        return AffineMatrix(
            a=self.e / det,
            b=-self.b / det,
            c=(self.b * self.f - self.c * self.e) / det,
            d=-self.d / det,
            e=self.a / det,
            f=(self.c * self.d - self.a * self.f) / det,
        )

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return (self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f)

    @staticmethod
    def identity() -> "AffineMatrix":
        return AffineMatrix(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @staticmethod
    def translation(tx: float, ty: float) -> "AffineMatrix":
        return AffineMatrix(1.0, 0.0, tx, 0.0, 1.0, ty)

    @staticmethod
    def shear_x(rate: float) -> "AffineMatrix":
        """Shear along the horizontal axis about the origin: (x, y) -> (x + rate*y, y)."""
        return AffineMatrix(1.0, rate, 0.0, 0.0, 1.0, 0.0)

    @staticmethod
    def shear_y(rate: float) -> "AffineMatrix":
        """Shear along the vertical axis about the origin: (x, y) -> (x, y + rate*x)."""
        return AffineMatrix(1.0, 0.0, 0.0, rate, 1.0, 0.0)

    @staticmethod
    def rotation(degrees: float, center_x: float, center_y: float) -> "AffineMatrix":
        """Rotation by ``degrees`` about (center_x, center_y).

        Positive angles rotate in the +x-to-+y direction; with image
        coordinates (y pointing down) that is clockwise on screen.
        """
        theta = math.radians(degrees)
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        return AffineMatrix(
            a=cos_t,
            b=-sin_t,
            c=center_x - cos_t * center_x + sin_t * center_y,
            d=sin_t,
            e=cos_t,
            f=center_y - sin_t * center_x - cos_t * center_y,
        )


def affine_warp(src: ImageBuffer, m: AffineMatrix, fill: tuple[int, int, int] = GRAY) -> ImageBuffer:
    """Warp ``src`` by ``m`` using inverse mapping and nearest-neighbor sampling.

    Each output pixel center (x + 0.5, y + 0.5) is mapped back through the
    inverse of ``m``; the sample is the source pixel whose center is nearest,
    with exact half-distances resolved toward the lower index, i.e. source
    index = ceil(coord - 1).  Output dimensions equal the input's; samples
    falling outside the source raster take ``fill``.

    Raises ValueError for a non-invertible matrix.
    """
    inv = m.inverse()
    h, w = src.height, src.width
    xs = np.arange(w, dtype=np.float64) + 0.5
    ys = np.arange(h, dtype=np.float64) + 0.5
    sx = inv.a * xs[None, :] + inv.b * ys[:, None] + inv.c
    sy = inv.d * xs[None, :] + inv.e * ys[:, None] + inv.f
    ix = np.ceil(sx - 1.0)
    iy = np.ceil(sy - 1.0)
    valid = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    ixc = np.where(valid, ix, 0).astype(np.intp)
    iyc = np.where(valid, iy, 0).astype(np.intp)
    out = np.empty((h, w, 3), dtype=np.uint8)
    out[:] = fill
    out[valid] = src.pixels[iyc[valid], ixc[valid]]
    return ImageBuffer(out)


def histogram(src: ImageBuffer, channel: int) -> np.ndarray:
    """Per-channel 256-bin histogram; counts sum to width*height."""
    if channel not in (0, 1, 2):
        raise ValueError(f"channel must be 0, 1 or 2, got {channel}")
    return np.bincount(src.pixels[:, :, channel].ravel(), minlength=256)


def blend(degenerate: ImageBuffer, original: ImageBuffer, factor: float) -> ImageBuffer:
    """Interpolate from ``degenerate`` (factor 0) to ``original`` (factor 1).

    Per channel: clamp(round(degenerate + factor * (original - degenerate)),
    0, 255), with round-half-to-even.  Factors above 1 extrapolate.
    """
    if (degenerate.width, degenerate.height) != (original.width, original.height):
        raise ValueError("blend requires images of equal dimensions")
    d = degenerate.pixels.astype(np.float64)
    o = original.pixels.astype(np.float64)
    mixed = np.clip(np.rint(d + factor * (o - d)), 0, 255)
    return ImageBuffer(mixed.astype(np.uint8))


def resize_nearest(src: ImageBuffer, new_width: int, new_height: int) -> ImageBuffer:
    """Nearest-neighbor resize using the same pixel-center convention as affine_warp."""
    if new_width < 1 or new_height < 1:
        raise ValueError("resize target must be at least 1x1")
    sx = (np.arange(new_width, dtype=np.float64) + 0.5) * (src.width / new_width)
    sy = (np.arange(new_height, dtype=np.float64) + 0.5) * (src.height / new_height)
    ix = np.clip(np.ceil(sx - 1.0).astype(np.intp), 0, src.width - 1)
    iy = np.clip(np.ceil(sy - 1.0).astype(np.intp), 0, src.height - 1)
    return ImageBuffer(src.pixels[iy[:, None], ix[None, :]])


def decode_image(path: str | Path) -> ImageBuffer:
    """Decode a PNG/JPEG file to 8-bit RGB (alpha dropped, grayscale replicated)."""
    with Image.open(path) as im:
        return ImageBuffer(np.asarray(im.convert("RGB")))


def encode_png(img: ImageBuffer, path: str | Path) -> None:
    Image.fromarray(img.pixels).save(path, format="PNG")


def encode_jpeg(img: ImageBuffer, path: str | Path, quality: int = 95) -> None:
    Image.fromarray(img.pixels).save(path, format="JPEG", quality=quality)
