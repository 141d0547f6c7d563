"""Shared helpers: random raster/annotation generators and a disk fixture."""

from __future__ import annotations

import json

import numpy as np
import pytest

from detaug import AnnotatedImage, BBox, ImageBuffer, encode_png


def random_image(rng: np.random.Generator, width: int, height: int) -> ImageBuffer:
    return ImageBuffer(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))


def random_box(rng: np.random.Generator, width: int, height: int, category_id: int = 0) -> BBox:
    x0 = float(rng.uniform(0, width - 2))
    y0 = float(rng.uniform(0, height - 2))
    x1 = float(rng.uniform(x0 + 1, width))
    y1 = float(rng.uniform(y0 + 1, height))
    return BBox(x0, y0, x1, y1, category_id)


def random_annotated(
    rng: np.random.Generator, width: int = 48, height: int = 48, max_boxes: int = 3
) -> AnnotatedImage:
    img = random_image(rng, width, height)
    boxes = tuple(
        random_box(rng, width, height, category_id=int(rng.integers(0, 5)))
        for _ in range(int(rng.integers(1, max_boxes + 1)))
    )
    return AnnotatedImage(img, boxes)


def build_fixture_dataset(root, n_images: int, seed: int = 0, max_boxes: int = 4):
    """Write a small on-disk dataset and return its paths."""
    rng = np.random.default_rng(seed)
    images_dir = root / "images"
    images_dir.mkdir(parents=True)
    images, annotations = [], []
    ann_id = 1
    for i in range(1, n_images + 1):
        w = int(rng.integers(40, 96))
        h = int(rng.integers(40, 96))
        encode_png(random_image(rng, w, h), images_dir / f"img_{i:03d}.png")
        images.append({"id": i, "file_name": f"img_{i:03d}.png", "width": w, "height": h})
        for _ in range(int(rng.integers(1, max_boxes + 1))):
            x0 = int(rng.integers(0, w - 8))
            y0 = int(rng.integers(0, h - 8))
            bw = int(rng.integers(4, w - x0))
            bh = int(rng.integers(4, h - y0))
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": i,
                    "category_id": int(rng.integers(1, 4)),
                    "bbox": [x0, y0, bw, bh],
                }
            )
            ann_id += 1
    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": c, "name": f"cat{c}"} for c in (1, 2, 3)],
    }
    ann_path = root / "annotations.json"
    ann_path.write_text(json.dumps(doc))
    return ann_path, images_dir


@pytest.fixture
def fixture_dataset(tmp_path):
    ann_path, images_dir = build_fixture_dataset(tmp_path, n_images=5, seed=11)
    return ann_path, images_dir


# One line per acceptance criterion, printed at the end of the run so the
# verdicts survive output capture.  test_acceptance.py appends via its
# `criterion` context manager.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
