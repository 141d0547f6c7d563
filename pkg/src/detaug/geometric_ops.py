"""Whole-image geometric operations that move boxes along with pixels.

Five operations: ShearX, ShearY, TranslateX, TranslateY, Rotate.  Each one
builds a single affine map, warps the pixels with a gray fill, and passes
every box through the same map; a box whose clipped envelope vanishes is
dropped from the annotation list.
"""

from __future__ import annotations

import enum

from .boxes import AnnotatedImage, transform_bbox
from .raster import AffineMatrix, affine_warp


class GeoOpKind(enum.Enum):
    SHEAR_X = "ShearX"
    SHEAR_Y = "ShearY"
    TRANSLATE_X = "TranslateX"
    TRANSLATE_Y = "TranslateY"
    ROTATE = "Rotate"


# Largest legal |value| per kind: shear rate, pixels, pixels, degrees.
MAX_ABS_VALUE: dict[GeoOpKind, float] = {
    GeoOpKind.SHEAR_X: 0.3,
    GeoOpKind.SHEAR_Y: 0.3,
    GeoOpKind.TRANSLATE_X: 150.0,
    GeoOpKind.TRANSLATE_Y: 150.0,
    GeoOpKind.ROTATE: 30.0,
}


def geometric_matrix(kind: GeoOpKind, value: float, width: int, height: int) -> AffineMatrix:
    """The affine map a geometric op applies to both pixels and boxes.

    Shears are anchored at the top-left origin; rotation is about the image
    center (width/2, height/2).
    """
    if kind is GeoOpKind.SHEAR_X:
        return AffineMatrix.shear_x(value)
    if kind is GeoOpKind.SHEAR_Y:
        return AffineMatrix.shear_y(value)
    if kind is GeoOpKind.TRANSLATE_X:
        return AffineMatrix.translation(value, 0.0)
    if kind is GeoOpKind.TRANSLATE_Y:
        return AffineMatrix.translation(0.0, value)
    if kind is GeoOpKind.ROTATE:
        return AffineMatrix.rotation(value, width / 2.0, height / 2.0)
    raise ValueError(f"unknown geometric op kind: {kind!r}")


def apply_geometric(
    img: AnnotatedImage,
    kind: GeoOpKind,
    value: float,
    min_box_area: float = 0.0,
) -> AnnotatedImage:
    """Warp image and boxes by the op's affine map.

    ``value`` is the already-signed magnitude and must lie within the kind's
    range.  Boxes clipped to area below ``min_box_area`` (or clipped away
    entirely) are dropped.
    """
    limit = MAX_ABS_VALUE[kind]
    if not abs(value) <= limit:
        raise ValueError(f"{kind.value} value {value} outside [-{limit}, {limit}]")
    m = geometric_matrix(kind, value, img.image.width, img.image.height)
    warped = affine_warp(img.image, m)
    kept = []
    for b in img.boxes:
        moved = transform_bbox(b, m, img.image.width, img.image.height)
        if moved is not None and moved.area >= min_box_area:
            kept.append(moved)
    return AnnotatedImage(warped, tuple(kept))
