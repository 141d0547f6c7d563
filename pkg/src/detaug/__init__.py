"""Deterministic bounding-box-aware data augmentation for object detection.

The package applies discretized augmentation policies (sequences of color,
geometric, and box-content operations with probabilities and magnitudes) to
annotated images, ships a learned detection policy, and includes a
desk-scale discrete search harness (random, regularized evolution, PPO)
over the policy space.
"""

from .boxes import AnnotatedImage, BBox, envelope_area_ratio, transform_bbox
from .bbox_ops import BBoxOnlyOpKind, apply_bbox_only, bbox_translate_sign
from .color_ops import ColorOpKind, cutout, enhance, equalize, solarize, solarize_add
from .dataset import (
    AnnotationRecord,
    CategoryRecord,
    Dataset,
    DatasetError,
    ImageRecord,
    WriteResult,
    baseline_augment,
    derive_seed,
    load_dataset,
    save_dataset,
    subset,
    write_augmented,
)
from .geometric_ops import GeoOpKind, apply_geometric, geometric_matrix
from .policy import (
    DEFAULT_LEVELS,
    DEFAULT_RANGES,
    MAGNITUDE_FREE,
    SEARCHABLE_KINDS,
    LevelConfig,
    MagnitudeRange,
    OpKind,
    OpSpec,
    Policy,
    PolicyParseError,
    SubPolicy,
    apply_policy,
    apply_sub_policy,
    builtin_coco_policy,
    choose_sub_policy_index,
    magnitude_scale,
    magnitude_value,
    parse_policy,
    probability_value,
    search_space_cardinality,
    serialize_policy,
)
from .preview import draw_box_outlines, render_preview
from .raster import (
    GRAY,
    AffineMatrix,
    ImageBuffer,
    affine_warp,
    blend,
    decode_image,
    encode_jpeg,
    encode_png,
    histogram,
    resize_nearest,
)
from .search import (
    DEFAULT_SPACE,
    AveragedReward,
    Candidate,
    ControllerParams,
    EvalRecord,
    ExternalReward,
    RewardEvaluationError,
    SearchAbortError,
    SearchResult,
    SearchSpace,
    TokenMatchReward,
    clipped_surrogate,
    evolution_search,
    masked_softmax,
    ppo_search,
    random_search,
    sample_actions,
    token_match_reward,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMatrix",
    "AnnotatedImage",
    "AnnotationRecord",
    "AveragedReward",
    "BBox",
    "BBoxOnlyOpKind",
    "Candidate",
    "CategoryRecord",
    "ColorOpKind",
    "ControllerParams",
    "Dataset",
    "DatasetError",
    "DEFAULT_LEVELS",
    "DEFAULT_RANGES",
    "DEFAULT_SPACE",
    "EvalRecord",
    "ExternalReward",
    "GRAY",
    "GeoOpKind",
    "ImageBuffer",
    "ImageRecord",
    "LevelConfig",
    "MAGNITUDE_FREE",
    "MagnitudeRange",
    "OpKind",
    "OpSpec",
    "Policy",
    "PolicyParseError",
    "RewardEvaluationError",
    "SEARCHABLE_KINDS",
    "SearchAbortError",
    "SearchResult",
    "SearchSpace",
    "SubPolicy",
    "TokenMatchReward",
    "WriteResult",
    "affine_warp",
    "apply_bbox_only",
    "apply_geometric",
    "apply_policy",
    "apply_sub_policy",
    "baseline_augment",
    "bbox_translate_sign",
    "blend",
    "builtin_coco_policy",
    "choose_sub_policy_index",
    "clipped_surrogate",
    "cutout",
    "decode_image",
    "derive_seed",
    "draw_box_outlines",
    "encode_jpeg",
    "encode_png",
    "enhance",
    "envelope_area_ratio",
    "equalize",
    "evolution_search",
    "geometric_matrix",
    "histogram",
    "load_dataset",
    "magnitude_scale",
    "magnitude_value",
    "masked_softmax",
    "parse_policy",
    "ppo_search",
    "probability_value",
    "random_search",
    "render_preview",
    "resize_nearest",
    "sample_actions",
    "save_dataset",
    "search_space_cardinality",
    "serialize_policy",
    "solarize",
    "solarize_add",
    "subset",
    "token_match_reward",
    "transform_bbox",
    "write_augmented",
]
