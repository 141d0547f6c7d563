"""Contact-sheet rendering: sub-policies x samples, with box outlines."""

from __future__ import annotations

import numpy as np

from .boxes import AnnotatedImage, BBox
from .dataset import derive_seed
from .policy import DEFAULT_LEVELS, LevelConfig, Policy, apply_sub_policy
from .raster import ImageBuffer

OUTLINE_COLOR: tuple[int, int, int] = (255, 32, 32)
OUTLINE_THICKNESS = 2


def draw_box_outlines(
    img: ImageBuffer,
    boxes: tuple[BBox, ...],
    color: tuple[int, int, int] = OUTLINE_COLOR,
    thickness: int = OUTLINE_THICKNESS,
) -> ImageBuffer:
    """Overlay each box as a rectangle outline drawn inward from its edges."""
    pixels = img.pixels.copy()
    for b in boxes:
        x0 = max(int(round(b.x_min)), 0)
        y0 = max(int(round(b.y_min)), 0)
        x1 = min(int(round(b.x_max)), img.width)
        y1 = min(int(round(b.y_max)), img.height)
        if x0 >= x1 or y0 >= y1:
            continue
        t = thickness
        pixels[y0 : min(y0 + t, y1), x0:x1] = color
        pixels[max(y1 - t, y0) : y1, x0:x1] = color
        pixels[y0:y1, x0 : min(x0 + t, x1)] = color
        pixels[y0:y1, max(x1 - t, x0) : x1] = color
    return ImageBuffer(pixels)


def render_preview(
    img: AnnotatedImage,
    policy: Policy,
    samples: int,
    seed: int = 0,
    cfg: LevelConfig = DEFAULT_LEVELS,
) -> ImageBuffer:
    """Render a grid of independent applications: one row per sub-policy,
    ``samples`` columns, each cell seeded from (seed, row, column)."""
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rows = []
    for row, sp in enumerate(policy.sub_policies):
        cells = []
        for col in range(samples):
            rng = np.random.default_rng(derive_seed(seed, row, col))
            out = apply_sub_policy(sp, img, rng, cfg)
            cells.append(draw_box_outlines(out.image, out.boxes).pixels)
        rows.append(np.concatenate(cells, axis=1))
    return ImageBuffer(np.concatenate(rows, axis=0))
