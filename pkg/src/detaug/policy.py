"""Discretized augmentation policies: levels, triplets, execution, serialization.

A policy is K sub-policies; a sub-policy is N ops applied in sequence; an op
is a (kind, probability level, magnitude level) triplet.  Probability levels
index a uniform grid over [0, 1]; magnitude levels index a uniform 0-10
scale that maps linearly onto each kind's native range.  One sub-policy is
drawn uniformly per image at application time.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .bbox_ops import BBoxOnlyOpKind, apply_bbox_only, bbox_translate_sign
from .boxes import AnnotatedImage
from .color_ops import ColorOpKind, cutout, enhance, equalize, solarize, solarize_add
from .geometric_ops import GeoOpKind, apply_geometric


class OpKind(enum.Enum):
    SHEAR_X = "ShearX"
    SHEAR_Y = "ShearY"
    TRANSLATE_X = "TranslateX"
    TRANSLATE_Y = "TranslateY"
    ROTATE = "Rotate"
    EQUALIZE = "Equalize"
    SOLARIZE = "Solarize"
    SOLARIZE_ADD = "SolarizeAdd"
    CONTRAST = "Contrast"
    COLOR = "Color"
    BRIGHTNESS = "Brightness"
    SHARPNESS = "Sharpness"
    CUTOUT = "Cutout"
    BBOX_ONLY_EQUALIZE = "BBox_Only_Equalize"
    BBOX_ONLY_SOLARIZE = "BBox_Only_Solarize"
    BBOX_ONLY_ROTATE = "BBox_Only_Rotate"
    BBOX_ONLY_SHEAR_X = "BBox_Only_ShearX"
    BBOX_ONLY_SHEAR_Y = "BBox_Only_ShearY"
    BBOX_ONLY_TRANSLATE_X = "BBox_Only_TranslateX"
    BBOX_ONLY_TRANSLATE_Y = "BBox_Only_TranslateY"
    BBOX_ONLY_FLIP_LR = "BBox_Only_FlipLR"
    BBOX_ONLY_CUTOUT = "BBox_Only_Cutout"
    NO_OP = "NoOp"


# The 22 kinds eligible for search, in canonical order; NoOp is representable
# in policies but excluded from the search vocabulary.
SEARCHABLE_KINDS: tuple[OpKind, ...] = tuple(k for k in OpKind if k is not OpKind.NO_OP)

MAGNITUDE_FREE: frozenset[OpKind] = frozenset(
    {OpKind.EQUALIZE, OpKind.BBOX_ONLY_EQUALIZE, OpKind.BBOX_ONLY_FLIP_LR, OpKind.NO_OP}
)

_GEOMETRIC_BY_KIND: dict[OpKind, GeoOpKind] = {
    OpKind.SHEAR_X: GeoOpKind.SHEAR_X,
    OpKind.SHEAR_Y: GeoOpKind.SHEAR_Y,
    OpKind.TRANSLATE_X: GeoOpKind.TRANSLATE_X,
    OpKind.TRANSLATE_Y: GeoOpKind.TRANSLATE_Y,
    OpKind.ROTATE: GeoOpKind.ROTATE,
}

_BBOX_ONLY_BY_KIND: dict[OpKind, BBoxOnlyOpKind] = {
    OpKind.BBOX_ONLY_EQUALIZE: BBoxOnlyOpKind.EQUALIZE,
    OpKind.BBOX_ONLY_SOLARIZE: BBoxOnlyOpKind.SOLARIZE,
    OpKind.BBOX_ONLY_ROTATE: BBoxOnlyOpKind.ROTATE,
    OpKind.BBOX_ONLY_SHEAR_X: BBoxOnlyOpKind.SHEAR_X,
    OpKind.BBOX_ONLY_SHEAR_Y: BBoxOnlyOpKind.SHEAR_Y,
    OpKind.BBOX_ONLY_TRANSLATE_X: BBoxOnlyOpKind.TRANSLATE_X,
    OpKind.BBOX_ONLY_TRANSLATE_Y: BBoxOnlyOpKind.TRANSLATE_Y,
    OpKind.BBOX_ONLY_FLIP_LR: BBoxOnlyOpKind.FLIP_LR,
    OpKind.BBOX_ONLY_CUTOUT: BBoxOnlyOpKind.CUTOUT,
}

_ENHANCE_BY_KIND: dict[OpKind, ColorOpKind] = {
    OpKind.CONTRAST: ColorOpKind.CONTRAST,
    OpKind.COLOR: ColorOpKind.COLOR,
    OpKind.BRIGHTNESS: ColorOpKind.BRIGHTNESS,
    OpKind.SHARPNESS: ColorOpKind.SHARPNESS,
}


@dataclass(frozen=True)
class MagnitudeRange:
    """Native range a magnitude scale maps onto.

    Symmetric ranges span [-hi, hi]; the scale sets |value| and the sign is
    drawn at application time.  Asymmetric ranges interpolate lo -> hi as
    the scale grows, so a reversed pair (lo > hi) makes higher scales
    produce smaller raw values (used by Solarize, where a lower threshold
    is a stronger distortion).
    """

    lo: float
    hi: float
    symmetric: bool = False

    def __post_init__(self):
        if self.symmetric and self.lo != -self.hi:
            raise ValueError("symmetric range must be [-a, a]")


DEFAULT_RANGES: Mapping[OpKind, MagnitudeRange] = {
    OpKind.SHEAR_X: MagnitudeRange(-0.3, 0.3, symmetric=True),
    OpKind.SHEAR_Y: MagnitudeRange(-0.3, 0.3, symmetric=True),
    OpKind.TRANSLATE_X: MagnitudeRange(-150.0, 150.0, symmetric=True),
    OpKind.TRANSLATE_Y: MagnitudeRange(-150.0, 150.0, symmetric=True),
    OpKind.ROTATE: MagnitudeRange(-30.0, 30.0, symmetric=True),
    OpKind.SOLARIZE: MagnitudeRange(256.0, 0.0),
    OpKind.SOLARIZE_ADD: MagnitudeRange(0.0, 110.0),
    OpKind.CONTRAST: MagnitudeRange(0.1, 1.9),
    OpKind.COLOR: MagnitudeRange(0.1, 1.9),
    OpKind.BRIGHTNESS: MagnitudeRange(0.1, 1.9),
    OpKind.SHARPNESS: MagnitudeRange(0.1, 1.9),
    OpKind.CUTOUT: MagnitudeRange(0.0, 60.0),
    OpKind.BBOX_ONLY_SOLARIZE: MagnitudeRange(256.0, 0.0),
    OpKind.BBOX_ONLY_ROTATE: MagnitudeRange(-30.0, 30.0, symmetric=True),
    OpKind.BBOX_ONLY_SHEAR_X: MagnitudeRange(-0.3, 0.3, symmetric=True),
    OpKind.BBOX_ONLY_SHEAR_Y: MagnitudeRange(-0.3, 0.3, symmetric=True),
    OpKind.BBOX_ONLY_TRANSLATE_X: MagnitudeRange(-150.0, 150.0, symmetric=True),
    OpKind.BBOX_ONLY_TRANSLATE_Y: MagnitudeRange(-150.0, 150.0, symmetric=True),
    OpKind.BBOX_ONLY_CUTOUT: MagnitudeRange(0.0, 60.0),
}


@dataclass(frozen=True)
class LevelConfig:
    """Discretization grid: L magnitude levels, M probability levels."""

    L: int = 6
    M: int = 6
    ranges: Mapping[OpKind, MagnitudeRange] = field(default_factory=lambda: DEFAULT_RANGES)

    def __post_init__(self):
        if self.L < 2 or self.M < 2:
            raise ValueError(f"need at least 2 levels per axis, got L={self.L} M={self.M}")


DEFAULT_LEVELS = LevelConfig()


@dataclass(frozen=True)
class OpSpec:
    """One operation slot: kind plus discrete probability and magnitude levels.

    Magnitude-free kinds keep their stored level (it is carried through
    serialization untouched); NoOp is normalized to levels (0, 0).
    """

    kind: OpKind
    prob_level: int = 0
    mag_level: int = 0

    def __post_init__(self):
        if self.kind is OpKind.NO_OP:
            object.__setattr__(self, "prob_level", 0)
            object.__setattr__(self, "mag_level", 0)
            return
        if self.prob_level < 0 or self.mag_level < 0:
            raise ValueError(f"negative level in {self}")


@dataclass(frozen=True)
class SubPolicy:
    """An ordered sequence of ops applied one after another."""

    ops: tuple[OpSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.ops:
            raise ValueError("sub-policy must contain at least one op")


@dataclass(frozen=True)
class Policy:
    """A set of sub-policies; one is drawn uniformly per image."""

    sub_policies: tuple[SubPolicy, ...]

    def __post_init__(self):
        object.__setattr__(self, "sub_policies", tuple(self.sub_policies))
        if not self.sub_policies:
            raise ValueError("policy must contain at least one sub-policy")


def probability_value(level: int, cfg: LevelConfig = DEFAULT_LEVELS) -> float:
    """Map a probability level onto [0, 1]: level / (M - 1)."""
    if not 0 <= level < cfg.M:
        raise ValueError(f"probability level {level} outside [0, {cfg.M - 1}]")
    return level / (cfg.M - 1)


def magnitude_scale(level: int, cfg: LevelConfig = DEFAULT_LEVELS) -> float:
    """Map a magnitude level onto the standardized 0-10 scale."""
    if not 0 <= level < cfg.L:
        raise ValueError(f"magnitude level {level} outside [0, {cfg.L - 1}]")
    return 10.0 * level / (cfg.L - 1)


def magnitude_value(
    kind: OpKind,
    level: int,
    cfg: LevelConfig = DEFAULT_LEVELS,
    rng: np.random.Generator | None = None,
) -> float:
    """Resolve a magnitude level to the kind's native units.

    Symmetric kinds draw the sign from ``rng`` (one uniform variate);
    asymmetric kinds consume no randomness.
    """
    r = cfg.ranges.get(kind)
    if r is None:
        raise ValueError(f"{kind.value} takes no magnitude")
    fraction = magnitude_scale(level, cfg) / 10.0
    if r.symmetric:
        if rng is None:
            raise ValueError(f"{kind.value} needs a random source for the sign draw")
        return bbox_translate_sign(rng) * fraction * r.hi
    return r.lo + fraction * (r.hi - r.lo)


def _apply_color_kind(
    img: AnnotatedImage, kind: OpKind, mag_level: int, cfg: LevelConfig, rng: np.random.Generator
) -> AnnotatedImage:
    if kind is OpKind.EQUALIZE:
        return AnnotatedImage(equalize(img.image), img.boxes)
    value = magnitude_value(kind, mag_level, cfg, rng)
    if kind is OpKind.SOLARIZE:
        out = solarize(img.image, value)
    elif kind is OpKind.SOLARIZE_ADD:
        out = solarize_add(img.image, value)
    elif kind is OpKind.CUTOUT:
        out = cutout(img.image, value, rng)
    elif kind in _ENHANCE_BY_KIND:
        out = enhance(img.image, _ENHANCE_BY_KIND[kind], value)
    else:
        raise ValueError(f"unknown color op kind: {kind!r}")
    return AnnotatedImage(out, img.boxes)


def _apply_op(
    spec: OpSpec,
    img: AnnotatedImage,
    rng: np.random.Generator,
    cfg: LevelConfig,
    bbox_only_gating: str,
) -> AnnotatedImage:
    kind = spec.kind
    if kind is OpKind.NO_OP:
        return img
    prob = probability_value(spec.prob_level, cfg)
    # Probability 0 skips without touching the random stream, so a
    # level-0 op is indistinguishable from an absent one; probability 1
    # applies without a coin for the mirror-image reason.
    if prob <= 0.0:
        return img
    bbox_kind = _BBOX_ONLY_BY_KIND.get(kind)
    if bbox_kind is not None:
        if bbox_only_gating == "per_box":
            box_prob = prob
        elif bbox_only_gating == "per_op":
            if prob < 1.0 and rng.random() >= prob:
                return img
            box_prob = 1.0
        else:
            raise ValueError(f"bbox_only_gating must be 'per_box' or 'per_op', got {bbox_only_gating!r}")
        value = 0.0
        if kind not in MAGNITUDE_FREE:
            value = magnitude_value(kind, spec.mag_level, cfg, rng)
        return apply_bbox_only(img, bbox_kind, value, box_prob, rng)
    if prob < 1.0 and rng.random() >= prob:
        return img
    geo_kind = _GEOMETRIC_BY_KIND.get(kind)
    if geo_kind is not None:
        value = magnitude_value(kind, spec.mag_level, cfg, rng)
        return apply_geometric(img, geo_kind, value)
    return _apply_color_kind(img, kind, spec.mag_level, cfg, rng)


def apply_sub_policy(
    sp: SubPolicy,
    img: AnnotatedImage,
    rng: np.random.Generator,
    cfg: LevelConfig = DEFAULT_LEVELS,
    bbox_only_gating: str = "per_box",
) -> AnnotatedImage:
    """Run the sub-policy's ops in order.

    Whole-image ops are gated by one Bernoulli(prob) coin; bbox-only ops
    forward prob to a per-box coin by default (``bbox_only_gating="per_op"``
    gates them once like every other op instead).  Magnitudes are resolved
    only when an op actually fires, in the order gate coin, sign draw,
    op-internal draws.
    """
    out = img
    for spec in sp.ops:
        out = _apply_op(spec, out, rng, cfg, bbox_only_gating)
    return out


def choose_sub_policy_index(p: Policy, rng: np.random.Generator) -> int:
    """Draw the index of the sub-policy to apply, uniformly."""
    return int(rng.integers(0, len(p.sub_policies)))


def apply_policy(
    p: Policy,
    img: AnnotatedImage,
    rng: np.random.Generator,
    cfg: LevelConfig = DEFAULT_LEVELS,
    bbox_only_gating: str = "per_box",
) -> AnnotatedImage:
    """Pick one sub-policy uniformly at random and apply it."""
    idx = choose_sub_policy_index(p, rng)
    return apply_sub_policy(p.sub_policies[idx], img, rng, cfg, bbox_only_gating)


def _spec_from_table(kind: OpKind, prob: float, scale: float, cfg: LevelConfig) -> OpSpec:
    return OpSpec(
        kind,
        prob_level=round(prob * (cfg.M - 1)),
        mag_level=round(scale * (cfg.L - 1) / 10.0),
    )


def builtin_coco_policy(cfg: LevelConfig = DEFAULT_LEVELS) -> Policy:
    """The learned detection policy shipped with the package.

    Probabilities are on [0, 1]; magnitudes on the 0-10 scale.
    """
    table = [
        [("TranslateX", 0.6, 4.0), ("Equalize", 0.8, 10.0)],
        [("BBox_Only_TranslateY", 0.2, 2.0), ("Cutout", 0.8, 8.0)],
        [("ShearY", 1.0, 2.0), ("BBox_Only_TranslateY", 0.6, 6.0)],
        [("Rotate", 0.6, 10.0), ("Color", 1.0, 6.0)],
        [("NoOp", 0.0, 0.0), ("NoOp", 0.0, 0.0)],
    ]
    subs = []
    for row in table:
        subs.append(
            SubPolicy(tuple(_spec_from_table(OpKind(name), p, s, cfg) for name, p, s in row))
        )
    return Policy(tuple(subs))


class PolicyParseError(ValueError):
    """Raised when a policy document is malformed; message names the field."""


def _scale_as_number(scale: float) -> int | float:
    return int(scale) if float(scale).is_integer() else scale


def serialize_policy(p: Policy, cfg: LevelConfig = DEFAULT_LEVELS) -> str:
    """Render a policy as canonical JSON text.

    Key order is fixed (op, prob, magnitude), one sub-policy per array
    element; integral magnitudes are written as integers.  NoOp entries
    carry no prob or magnitude.
    """
    subs = []
    for sp in p.sub_policies:
        entries = []
        for op in sp.ops:
            if op.kind is OpKind.NO_OP:
                entries.append({"op": "NoOp"})
                continue
            entries.append(
                {
                    "op": op.kind.value,
                    "prob": probability_value(op.prob_level, cfg),
                    "magnitude": _scale_as_number(magnitude_scale(op.mag_level, cfg)),
                }
            )
        subs.append(entries)
    return json.dumps({"version": 1, "sub_policies": subs}, indent=2) + "\n"


_KIND_BY_NAME = {k.value: k for k in OpKind}

_GRID_TOLERANCE = 1e-9


def _level_from_grid(raw: float, steps: int, what: str, where: str) -> int:
    scaled = raw * steps
    level = round(scaled)
    if abs(scaled - level) > _GRID_TOLERANCE * max(1, steps):
        raise PolicyParseError(
            f"{where}: {what} {raw} is not on the {steps + 1}-level grid"
        )
    return level


def parse_policy(
    text: str, cfg: LevelConfig = DEFAULT_LEVELS, ops_per_sub_policy: int = 2
) -> Policy:
    """Parse policy JSON, validating names, grids, and arity.

    Raises PolicyParseError with the offending location in the message.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise PolicyParseError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise PolicyParseError("top level must be an object")
    if doc.get("version") != 1:
        raise PolicyParseError(f"unsupported version: {doc.get('version')!r}")
    subs_raw = doc.get("sub_policies")
    if not isinstance(subs_raw, list) or not subs_raw:
        raise PolicyParseError("sub_policies must be a nonempty array")
    subs = []
    for i, sp_raw in enumerate(subs_raw):
        where_sp = f"sub_policies[{i}]"
        if not isinstance(sp_raw, list):
            raise PolicyParseError(f"{where_sp}: must be an array of ops")
        if len(sp_raw) != ops_per_sub_policy:
            raise PolicyParseError(
                f"{where_sp}: expected {ops_per_sub_policy} ops, got {len(sp_raw)}"
            )
        ops = []
        for j, entry in enumerate(sp_raw):
            where = f"{where_sp}[{j}]"
            if not isinstance(entry, dict):
                raise PolicyParseError(f"{where}: must be an object")
            name = entry.get("op")
            if not isinstance(name, str):
                raise PolicyParseError(f"{where}: missing op name")
            kind = _KIND_BY_NAME.get(name)
            if kind is None:
                raise PolicyParseError(f"{where}: unknown op {name!r}")
            if kind is OpKind.NO_OP:
                ops.append(OpSpec(kind))
                continue
            prob = entry.get("prob")
            if not isinstance(prob, (int, float)) or isinstance(prob, bool):
                raise PolicyParseError(f"{where}: missing numeric prob")
            if not 0.0 <= prob <= 1.0:
                raise PolicyParseError(f"{where}: prob {prob} outside [0, 1]")
            prob_level = _level_from_grid(float(prob), cfg.M - 1, "prob", where)
            mag_raw = entry.get("magnitude")
            if mag_raw is None:
                if kind not in MAGNITUDE_FREE:
                    raise PolicyParseError(f"{where}: missing magnitude for {name}")
                mag_level = 0
            else:
                if not isinstance(mag_raw, (int, float)) or isinstance(mag_raw, bool):
                    raise PolicyParseError(f"{where}: magnitude must be a number")
                if not 0.0 <= mag_raw <= 10.0:
                    raise PolicyParseError(f"{where}: magnitude {mag_raw} outside [0, 10]")
                mag_level = _level_from_grid(mag_raw / 10.0, cfg.L - 1, "magnitude", where)
            ops.append(OpSpec(kind, prob_level, mag_level))
        subs.append(SubPolicy(tuple(ops)))
    return Policy(tuple(subs))


def search_space_cardinality(num_ops: int, L: int, M: int, N: int, K: int) -> int:
    """Exact count of distinct policies: (num_ops * L * M) ** (N * K)."""
    for name, v in (("num_ops", num_ops), ("L", L), ("M", M), ("N", N), ("K", K)):
        if not isinstance(v, int) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    return (num_ops * L * M) ** (N * K)
