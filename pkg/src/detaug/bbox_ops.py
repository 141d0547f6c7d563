"""Operations applied to pixel content inside each box, never to the boxes.

Nine operations: BBox_Only_{Equalize, Solarize, Rotate, ShearX, ShearY,
TranslateX, TranslateY, FlipLR, Cutout}.  Each box's integer crop is
treated as a standalone image: geometric variants rotate about the crop
center or shear/translate about the crop origin, vacated crop pixels take
the gray fill, and content pushed past the crop edge is discarded rather
than blended into the surroundings.  Box records pass through untouched.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .boxes import AnnotatedImage
from .color_ops import cutout, equalize, solarize
from .raster import AffineMatrix, ImageBuffer, affine_warp


class BBoxOnlyOpKind(enum.Enum):
    EQUALIZE = "BBox_Only_Equalize"
    SOLARIZE = "BBox_Only_Solarize"
    ROTATE = "BBox_Only_Rotate"
    SHEAR_X = "BBox_Only_ShearX"
    SHEAR_Y = "BBox_Only_ShearY"
    TRANSLATE_X = "BBox_Only_TranslateX"
    TRANSLATE_Y = "BBox_Only_TranslateY"
    FLIP_LR = "BBox_Only_FlipLR"
    CUTOUT = "BBox_Only_Cutout"


def _check_value(kind: BBoxOnlyOpKind, value: float) -> None:
    if kind in (BBoxOnlyOpKind.SHEAR_X, BBoxOnlyOpKind.SHEAR_Y):
        if not abs(value) <= 0.3:
            raise ValueError(f"{kind.value} rate {value} outside [-0.3, 0.3]")
    elif kind in (BBoxOnlyOpKind.TRANSLATE_X, BBoxOnlyOpKind.TRANSLATE_Y):
        if not abs(value) <= 150.0:
            raise ValueError(f"{kind.value} offset {value} outside [-150, 150]")
    elif kind is BBoxOnlyOpKind.ROTATE:
        if not abs(value) <= 30.0:
            raise ValueError(f"{kind.value} angle {value} outside [-30, 30]")
    elif kind is BBoxOnlyOpKind.SOLARIZE:
        if not 0 <= value <= 256:
            raise ValueError(f"{kind.value} threshold {value} outside [0, 256]")
    elif kind is BBoxOnlyOpKind.CUTOUT:
        if not 0 <= value <= 60:
            raise ValueError(f"{kind.value} size {value} outside [0, 60]")
    # Equalize and FlipLR take no magnitude; value is ignored.


def _apply_to_crop(
    crop: ImageBuffer, kind: BBoxOnlyOpKind, value: float, rng: np.random.Generator
) -> ImageBuffer:
    if kind is BBoxOnlyOpKind.EQUALIZE:
        return equalize(crop)
    if kind is BBoxOnlyOpKind.SOLARIZE:
        return solarize(crop, value)
    if kind is BBoxOnlyOpKind.ROTATE:
        m = AffineMatrix.rotation(value, crop.width / 2.0, crop.height / 2.0)
        return affine_warp(crop, m)
    if kind is BBoxOnlyOpKind.SHEAR_X:
        return affine_warp(crop, AffineMatrix.shear_x(value))
    if kind is BBoxOnlyOpKind.SHEAR_Y:
        return affine_warp(crop, AffineMatrix.shear_y(value))
    if kind is BBoxOnlyOpKind.TRANSLATE_X:
        return affine_warp(crop, AffineMatrix.translation(value, 0.0))
    if kind is BBoxOnlyOpKind.TRANSLATE_Y:
        return affine_warp(crop, AffineMatrix.translation(0.0, value))
    if kind is BBoxOnlyOpKind.FLIP_LR:
        return ImageBuffer(crop.pixels[:, ::-1])
    if kind is BBoxOnlyOpKind.CUTOUT:
        return cutout(crop, value, rng)
    raise ValueError(f"unknown bbox-only op kind: {kind!r}")


def apply_bbox_only(
    img: AnnotatedImage,
    kind: BBoxOnlyOpKind,
    value: float,
    prob: float,
    rng: np.random.Generator,
) -> AnnotatedImage:
    """Apply the op to each box's content independently with probability ``prob``.

    Boxes are visited in annotation order (overlaps therefore compose in
    that order).  The gate coin is drawn only when 0 < prob < 1, so prob 0
    consumes no randomness and prob 1 applies unconditionally; a skipped or
    degenerate (empty-crop) box leaves its pixels byte-identical.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"prob must be in [0, 1], got {prob}")
    _check_value(kind, value)
    if prob <= 0.0 or not img.boxes:
        return img
    pixels = img.image.pixels.copy()
    width, height = img.image.width, img.image.height
    for b in img.boxes:
        if prob < 1.0 and rng.random() >= prob:
            continue
        x0 = max(int(math.floor(b.x_min)), 0)
        y0 = max(int(math.floor(b.y_min)), 0)
        x1 = min(int(math.ceil(b.x_max)), width)
        y1 = min(int(math.ceil(b.y_max)), height)
        if x0 >= x1 or y0 >= y1:
            continue
        crop = ImageBuffer(pixels[y0:y1, x0:x1])
        pixels[y0:y1, x0:x1] = _apply_to_crop(crop, kind, value, rng).pixels
    return AnnotatedImage(ImageBuffer(pixels), img.boxes)


def bbox_translate_sign(rng: np.random.Generator) -> int:
    """Draw +1 or -1 with equal probability (one uniform variate)."""
    return 1 if rng.random() < 0.5 else -1
