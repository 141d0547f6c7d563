"""Bounding boxes and their behavior under geometric image distortions.

Boxes are axis-aligned with float pixel coordinates.  When an image is
warped by an affine map, each box is updated to the axis-aligned envelope
of its four mapped corners, clipped to the image; envelopes only ever grow
relative to the rotated content, which is the accepted cost of staying
axis-aligned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .raster import AffineMatrix, ImageBuffer


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in pixel coordinates with a category label."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    category_id: int = 0

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"degenerate box ordering: {self}")
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"negative box coordinate: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> tuple[tuple[float, float], ...]:
        return (
            (self.x_min, self.y_min),
            (self.x_max, self.y_min),
            (self.x_max, self.y_max),
            (self.x_min, self.y_max),
        )


@dataclass(frozen=True)
class AnnotatedImage:
    """An image together with its box annotations."""

    image: ImageBuffer
    boxes: tuple[BBox, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))
        for b in self.boxes:
            if b.x_max > self.image.width or b.y_max > self.image.height:
                raise ValueError(
                    f"box {b} exceeds image bounds "
                    f"{self.image.width}x{self.image.height}"
                )


def transform_bbox(b: BBox, m: AffineMatrix, width: int, height: int) -> BBox | None:
    """Map a box through ``m``: envelope of mapped corners, clipped to the image.

    Returns None when the clipped envelope has zero width or height (the box
    left the frame entirely); callers drop such boxes.
    """
    mapped = [m.apply(x, y) for x, y in b.corners()]
    xs = [p[0] for p in mapped]
    ys = [p[1] for p in mapped]
    x_min = min(max(min(xs), 0.0), float(width))
    x_max = min(max(max(xs), 0.0), float(width))
    y_min = min(max(min(ys), 0.0), float(height))
    y_max = min(max(max(ys), 0.0), float(height))
    if x_min >= x_max or y_min >= y_max:
        return None
    return BBox(x_min, y_min, x_max, y_max, b.category_id)


def envelope_area_ratio(b: BBox, m: AffineMatrix) -> float:
    """Area of the unclipped mapped envelope divided by the box's own area.

    Quantifies how much an axis-aligned box grows under a transform; pure
    rotations of a non-degenerate box always yield a ratio >= 1.
    """
    if b.area == 0.0:
        raise ValueError("envelope_area_ratio is undefined for a zero-area box")
    mapped = [m.apply(x, y) for x, y in b.corners()]
    xs = [p[0] for p in mapped]
    ys = [p[1] for p in mapped]
    env_area = (max(xs) - min(xs)) * (max(ys) - min(ys))
    return env_area / b.area
