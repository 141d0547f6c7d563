"""Detection dataset ingest/emit, subset sampling, and the parallel writer.

Annotations travel as a JSON document of images, annotations, and
categories, with boxes as [x, y, w, h] pixel records; image files live
under an image root named by file_name.  The augmented-dataset writer
derives an independent random stream per (image, pass) from a stable hash,
so its output is identical no matter how many workers run the jobs.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .boxes import AnnotatedImage, BBox
from .policy import DEFAULT_LEVELS, LevelConfig, Policy, apply_policy
from .raster import GRAY, ImageBuffer, decode_image, encode_jpeg, encode_png, resize_nearest

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """A dataset file is missing, malformed, or self-inconsistent."""


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class AnnotationRecord:
    id: int
    image_id: int
    category_id: int
    bbox: tuple[float, float, float, float]  # x, y, w, h


@dataclass(frozen=True)
class CategoryRecord:
    id: int
    name: str


@dataclass(frozen=True)
class Dataset:
    images: tuple[ImageRecord, ...]
    annotations: tuple[AnnotationRecord, ...]
    categories: tuple[CategoryRecord, ...]
    image_root: Path | None = None
    clamp_warnings: int = 0

    def annotations_by_image(self) -> dict[int, list[AnnotationRecord]]:
        grouped: dict[int, list[AnnotationRecord]] = {img.id: [] for img in self.images}
        for ann in self.annotations:
            grouped[ann.image_id].append(ann)
        return grouped


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DatasetError(message)


def _int_field(record: dict, key: str, where: str) -> int:
    v = record.get(key)
    _require(isinstance(v, int) and not isinstance(v, bool), f"{where}: {key} must be an integer")
    return v


def load_dataset(annotation_path: str | Path, image_root: str | Path | None = None) -> Dataset:
    """Load and validate an annotation file.

    Boxes reaching outside their image's stated dimensions are clamped and
    counted in ``clamp_warnings``; structural problems (missing file, bad
    JSON, dangling image_id, negative box size) raise DatasetError naming
    the offending record.
    """
    path = Path(annotation_path)
    try:
        text = path.read_text()
    except OSError as e:
        raise DatasetError(f"cannot read annotation file {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path}: invalid JSON: {e}") from e
    _require(isinstance(doc, dict), f"{path}: top level must be an object")
    for key in ("images", "annotations"):
        _require(isinstance(doc.get(key), list), f"{path}: missing array '{key}'")

    images = []
    dims: dict[int, tuple[int, int]] = {}
    for i, rec in enumerate(doc["images"]):
        where = f"images[{i}]"
        _require(isinstance(rec, dict), f"{where}: must be an object")
        img_id = _int_field(rec, "id", where)
        _require(img_id not in dims, f"{where}: duplicate image id {img_id}")
        name = rec.get("file_name")
        _require(isinstance(name, str) and name != "", f"{where}: file_name must be a string")
        w = _int_field(rec, "width", where)
        h = _int_field(rec, "height", where)
        _require(w >= 1 and h >= 1, f"{where}: dimensions must be positive, got {w}x{h}")
        images.append(ImageRecord(img_id, name, w, h))
        dims[img_id] = (w, h)

    annotations = []
    clamp_warnings = 0
    for i, rec in enumerate(doc["annotations"]):
        where = f"annotations[{i}]"
        _require(isinstance(rec, dict), f"{where}: must be an object")
        ann_id = _int_field(rec, "id", where)
        image_id = _int_field(rec, "image_id", where)
        _require(
            image_id in dims, f"annotation {ann_id}: image_id {image_id} matches no image"
        )
        category_id = _int_field(rec, "category_id", where)
        bbox = rec.get("bbox")
        _require(
            isinstance(bbox, list)
            and len(bbox) == 4
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in bbox),
            f"annotation {ann_id}: bbox must be four numbers",
        )
        x, y, w, h = (float(v) for v in bbox)
        _require(w >= 0 and h >= 0, f"annotation {ann_id}: negative box size {w}x{h}")
        img_w, img_h = dims[image_id]
        x0 = min(max(x, 0.0), float(img_w))
        y0 = min(max(y, 0.0), float(img_h))
        x1 = min(max(x + w, 0.0), float(img_w))
        y1 = min(max(y + h, 0.0), float(img_h))
        if (x0, y0, x1 - x0, y1 - y0) != (x, y, w, h):
            clamp_warnings += 1
        annotations.append(AnnotationRecord(ann_id, image_id, category_id, (x0, y0, x1 - x0, y1 - y0)))

    categories = []
    for i, rec in enumerate(doc.get("categories", [])):
        where = f"categories[{i}]"
        _require(isinstance(rec, dict), f"{where}: must be an object")
        cat_id = _int_field(rec, "id", where)
        cat_name = rec.get("name")
        _require(isinstance(cat_name, str), f"{where}: name must be a string")
        categories.append(CategoryRecord(cat_id, cat_name))

    if clamp_warnings:
        logger.warning("%s: clamped %d out-of-bounds boxes", path, clamp_warnings)
    return Dataset(
        tuple(images),
        tuple(annotations),
        tuple(categories),
        image_root=Path(image_root) if image_root is not None else None,
        clamp_warnings=clamp_warnings,
    )


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write the annotation document with a stable field order."""
    doc = {
        "images": [
            {"id": r.id, "file_name": r.file_name, "width": r.width, "height": r.height}
            for r in ds.images
        ],
        "annotations": [
            {
                "id": r.id,
                "image_id": r.image_id,
                "category_id": r.category_id,
                "bbox": list(r.bbox),
            }
            for r in ds.annotations
        ],
        "categories": [{"id": r.id, "name": r.name} for r in ds.categories],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def subset(ds: Dataset, n: int, seed: int) -> Dataset:
    """Uniform sample of n images (without replacement) plus their annotations."""
    if not 1 <= n <= len(ds.images):
        raise ValueError(f"subset size {n} outside [1, {len(ds.images)}]")
    ordered = sorted(ds.images, key=lambda r: r.id)
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ordered), size=n, replace=False)
    chosen = {ordered[int(i)].id for i in picked}
    return replace(
        ds,
        images=tuple(r for r in ordered if r.id in chosen),
        annotations=tuple(a for a in ds.annotations if a.image_id in chosen),
        clamp_warnings=0,
    )


def bbox_to_box(bbox: tuple[float, float, float, float], category_id: int) -> BBox:
    x, y, w, h = bbox
    return BBox(x, y, x + w, y + h, category_id)


def box_to_bbox(b: BBox) -> tuple[float, float, float, float]:
    return (b.x_min, b.y_min, b.width, b.height)


def baseline_augment(
    img: AnnotatedImage,
    rng: np.random.Generator,
    out_size: int = 640,
    short_side_min: int = 512,
    short_side_max: int = 786,
) -> AnnotatedImage:
    """Mirror-scale-crop preprocessing: flip at p=0.5, resize the short side
    to a uniform integer in [short_side_min, short_side_max] preserving
    aspect, then random-crop (per axis) or top-left gray-pad to a square.

    Boxes are mirrored, scaled by the realized per-axis ratios, shifted by
    the crop offset, clipped, and dropped when nothing remains.
    """
    buf = img.image
    boxes = list(img.boxes)
    if rng.random() < 0.5:
        w = buf.width
        buf = ImageBuffer(buf.pixels[:, ::-1])
        boxes = [BBox(w - b.x_max, b.y_min, w - b.x_min, b.y_max, b.category_id) for b in boxes]
    target_short = int(rng.integers(short_side_min, short_side_max + 1))
    w, h = buf.width, buf.height
    if w <= h:
        new_w = target_short
        new_h = max(1, round(h * target_short / w))
    else:
        new_h = target_short
        new_w = max(1, round(w * target_short / h))
    ratio_x, ratio_y = new_w / w, new_h / h
    buf = resize_nearest(buf, new_w, new_h)
    off_x = int(rng.integers(0, new_w - out_size + 1)) if new_w > out_size else 0
    off_y = int(rng.integers(0, new_h - out_size + 1)) if new_h > out_size else 0
    canvas = np.empty((out_size, out_size, 3), dtype=np.uint8)
    canvas[:] = GRAY
    region = buf.pixels[off_y : off_y + min(out_size, new_h), off_x : off_x + min(out_size, new_w)]
    canvas[: region.shape[0], : region.shape[1]] = region
    out_boxes = []
    for b in boxes:
        x0 = min(max(b.x_min * ratio_x - off_x, 0.0), float(out_size))
        y0 = min(max(b.y_min * ratio_y - off_y, 0.0), float(out_size))
        x1 = min(max(b.x_max * ratio_x - off_x, 0.0), float(out_size))
        y1 = min(max(b.y_max * ratio_y - off_y, 0.0), float(out_size))
        if x1 > x0 and y1 > y0:
            out_boxes.append(BBox(x0, y0, x1, y1, b.category_id))
    return AnnotatedImage(ImageBuffer(canvas), tuple(out_boxes))


def derive_seed(master_seed: int, image_id: int, pass_index: int = 0) -> int:
    """Stable 64-bit stream seed for one (image, pass) job.

    Hash-based (not Python's hash()) so the value is identical across
    processes, platforms, and runs.
    """
    key = f"{master_seed}:{image_id}:{pass_index}".encode("ascii")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


@dataclass
class WriteResult:
    """Outcome of an augmented write.

    ``boxes_in`` counts box instances presented across all (image, pass)
    jobs, so ``boxes_in - boxes_out`` is the number dropped (by clipping or
    by a failed job).
    """

    dataset: Dataset
    errors: list[str]
    images_written: int
    boxes_in: int
    boxes_out: int


def _augment_one(
    img_rec: ImageRecord,
    anns: list[AnnotationRecord],
    pass_index: int,
    passes: int,
    ds_root: Path,
    policy: Policy,
    cfg: LevelConfig,
    master_seed: int,
    images_dir: Path,
    use_jpeg: bool,
):
    new_id = img_rec.id * passes + pass_index
    try:
        buf = decode_image(ds_root / img_rec.file_name)
        boxes = []
        for a in anns:
            b = bbox_to_box(a.bbox, a.category_id)
            # The stated dims may disagree with the actual file; re-clamp.
            x0 = min(b.x_min, float(buf.width))
            y0 = min(b.y_min, float(buf.height))
            x1 = min(b.x_max, float(buf.width))
            y1 = min(b.y_max, float(buf.height))
            boxes.append(BBox(x0, y0, x1, y1, b.category_id))
        rng = np.random.default_rng(derive_seed(master_seed, img_rec.id, pass_index))
        out = apply_policy(policy, AnnotatedImage(buf, tuple(boxes)), rng, cfg)
        ext = "jpg" if use_jpeg else "png"
        file_name = f"{new_id:012d}.{ext}"
        if use_jpeg:
            encode_jpeg(out.image, images_dir / file_name)
        else:
            encode_png(out.image, images_dir / file_name)
        record = ImageRecord(new_id, file_name, out.image.width, out.image.height)
        return record, out.boxes, None
    except Exception as e:  # per-image failures must not kill the run
        return None, (), f"{img_rec.file_name} (image {img_rec.id}, pass {pass_index}): {e}"


def write_augmented(
    ds: Dataset,
    policy: Policy,
    out_dir: str | Path,
    master_seed: int,
    passes: int = 1,
    workers: int = 1,
    cfg: LevelConfig = DEFAULT_LEVELS,
    use_jpeg: bool = False,
) -> WriteResult:
    """Apply the policy to every image ``passes`` times and write a new dataset.

    Output is a directory with images/ and annotations.json.  Each (image,
    pass) job owns a random stream derived from (master_seed, image id,
    pass index), so outputs are byte-identical for any worker count.  New
    image ids are original_id * passes + pass_index.
    """
    if passes < 1:
        raise ValueError(f"passes must be >= 1, got {passes}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if ds.image_root is None:
        raise ValueError("dataset has no image root; load it with image_root set")
    out_path = Path(out_dir)
    out_path.mkdir(exist_ok=True)
    images_dir = out_path / "images"
    images_dir.mkdir(exist_ok=True)
    grouped = ds.annotations_by_image()
    jobs = [
        (img, pass_index)
        for img in sorted(ds.images, key=lambda r: r.id)
        for pass_index in range(passes)
    ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(
                lambda job: _augment_one(
                    job[0],
                    grouped[job[0].id],
                    job[1],
                    passes,
                    ds.image_root,
                    policy,
                    cfg,
                    master_seed,
                    images_dir,
                    use_jpeg,
                ),
                jobs,
            )
        )
    out_images = []
    out_annotations = []
    errors = []
    next_ann_id = 1
    for record, boxes, error in results:
        if error is not None:
            errors.append(error)
            logger.error("%s", error)
            continue
        out_images.append(record)
        for b in boxes:
            out_annotations.append(
                AnnotationRecord(next_ann_id, record.id, b.category_id, box_to_bbox(b))
            )
            next_ann_id += 1
    out_ds = Dataset(
        tuple(out_images),
        tuple(out_annotations),
        ds.categories,
        image_root=images_dir,
    )
    save_dataset(out_ds, out_path / "annotations.json")
    logger.info(
        "wrote %d images (%d boxes) to %s with %d errors",
        len(out_images),
        len(out_annotations),
        out_path,
        len(errors),
    )
    return WriteResult(
        dataset=out_ds,
        errors=errors,
        images_written=len(out_images),
        boxes_in=len(ds.annotations) * passes,
        boxes_out=len(out_annotations),
    )
