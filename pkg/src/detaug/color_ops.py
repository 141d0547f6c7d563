"""Whole-image operations that never move bounding boxes.

Eight operations: Equalize, Solarize, SolarizeAdd, Contrast, Color,
Brightness, Sharpness, Cutout.  Cutout lives here because, while it erases
pixel content, it leaves every box record untouched.
"""

from __future__ import annotations

import enum

import numpy as np

from .raster import GRAY, ImageBuffer, blend


class ColorOpKind(enum.Enum):
    EQUALIZE = "Equalize"
    SOLARIZE = "Solarize"
    SOLARIZE_ADD = "SolarizeAdd"
    CONTRAST = "Contrast"
    COLOR = "Color"
    BRIGHTNESS = "Brightness"
    SHARPNESS = "Sharpness"
    CUTOUT = "Cutout"


ENHANCE_KINDS = frozenset(
    {ColorOpKind.CONTRAST, ColorOpKind.COLOR, ColorOpKind.BRIGHTNESS, ColorOpKind.SHARPNESS}
)


def equalize(src: ImageBuffer) -> ImageBuffer:
    """Flatten each channel's histogram with an integer lookup table.

    Per channel: with histogram h and step = (pixels - count of the highest
    occupied bin) // 255, build lut[i] = min((step//2 + sum(h[:i])) // step,
    255).  Channels with at most one occupied bin, or step 0, pass through
    unchanged.
    """
    out = src.pixels.copy()
    total = src.width * src.height
    for c in range(3):
        h = np.bincount(out[:, :, c].ravel(), minlength=256).astype(np.int64)
        occupied = np.flatnonzero(h)
        if occupied.size <= 1:
            continue
        step = (total - int(h[occupied[-1]])) // 255
        if step == 0:
            continue
        cumulative = step // 2 + np.concatenate(([0], np.cumsum(h)[:-1]))
        lut = np.minimum(cumulative // step, 255).astype(np.uint8)
        out[:, :, c] = lut[out[:, :, c]]
    return ImageBuffer(out)


def solarize(src: ImageBuffer, threshold: float) -> ImageBuffer:
    """Invert every channel value at or above ``threshold`` (0..256)."""
    if not 0 <= threshold <= 256:
        raise ValueError(f"solarize threshold must be in [0, 256], got {threshold}")
    p = src.pixels
    return ImageBuffer(np.where(p >= threshold, 255 - p, p).astype(np.uint8))


def solarize_add(src: ImageBuffer, addition: float) -> ImageBuffer:
    """Brighten every channel value below 128 by ``addition`` (0..110), clamped."""
    if not 0 <= addition <= 110:
        raise ValueError(f"solarize addition must be in [0, 110], got {addition}")
    p = src.pixels.astype(np.float64)
    bumped = np.clip(np.rint(p + addition), 0, 255)
    return ImageBuffer(np.where(p < 128, bumped, p).astype(np.uint8))


def _luminance(pixels: np.ndarray) -> np.ndarray:
    """Per-pixel luminance, rounded to the nearest integer (0.299R + 0.587G + 0.114B)."""
    p = pixels.astype(np.float64)
    return np.rint(0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2])


def _degenerate(src: ImageBuffer, kind: ColorOpKind) -> ImageBuffer:
    if kind is ColorOpKind.CONTRAST:
        mean = np.rint(_luminance(src.pixels).mean())
        return ImageBuffer.filled(src.width, src.height, (int(mean),) * 3)
    if kind is ColorOpKind.COLOR:
        lum = _luminance(src.pixels).astype(np.uint8)
        return ImageBuffer(np.repeat(lum[:, :, None], 3, axis=2))
    if kind is ColorOpKind.BRIGHTNESS:
        return ImageBuffer.filled(src.width, src.height, (0, 0, 0))
    if kind is ColorOpKind.SHARPNESS:
        return _smoothed(src)
    raise ValueError(f"{kind} has no enhancement degenerate")


def _smoothed(src: ImageBuffer) -> ImageBuffer:
    """3x3 smoothing with kernel [[1,1,1],[1,5,1],[1,1,1]]/13 on interior pixels.

    Border pixels are copied from the source.
    """
    p = src.pixels.astype(np.float64)
    out = src.pixels.copy()
    if src.width < 3 or src.height < 3:
        return ImageBuffer(out)
    acc = np.zeros_like(p[1:-1, 1:-1])
    weights = ((1, 1, 1), (1, 5, 1), (1, 1, 1))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            w = weights[dy + 1][dx + 1]
            acc += w * p[1 + dy : p.shape[0] - 1 + dy, 1 + dx : p.shape[1] - 1 + dx]
    out[1:-1, 1:-1] = np.clip(np.rint(acc / 13.0), 0, 255).astype(np.uint8)
    return ImageBuffer(out)


def enhance(src: ImageBuffer, kind: ColorOpKind, factor: float) -> ImageBuffer:
    """Blend from a per-kind degenerate image toward the source.

    Factor 1 reproduces the source exactly; factor 0 yields the degenerate
    (gray for Contrast, grayscale for Color, black for Brightness, smoothed
    for Sharpness); factors up to 1.9 extrapolate past the source.
    """
    if kind not in ENHANCE_KINDS:
        raise ValueError(f"not an enhancement op: {kind}")
    return blend(_degenerate(src, kind), src, factor)


def cutout(src: ImageBuffer, size: float, rng: np.random.Generator) -> ImageBuffer:
    """Gray out a square patch of side ``size`` at a uniformly random center.

    The center is drawn over all pixels (x first, then y); the patch covers
    columns [cx - side//2, cx - side//2 + side) and the analogous rows,
    clipped to the image.  Size 0 is the identity and draws nothing.
    """
    if size < 0:
        raise ValueError(f"cutout size must be >= 0, got {size}")
    side = int(round(size))
    if side == 0:
        return src
    cx = int(rng.integers(0, src.width))
    cy = int(rng.integers(0, src.height))
    x0 = max(cx - side // 2, 0)
    y0 = max(cy - side // 2, 0)
    x1 = min(cx - side // 2 + side, src.width)
    y1 = min(cy - side // 2 + side, src.height)
    out = src.pixels.copy()
    out[y0:y1, x0:x1] = GRAY
    return ImageBuffer(out)
