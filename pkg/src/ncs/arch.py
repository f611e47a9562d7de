"""Architecture descriptors and the transforms that produce candidate networks.

A descriptor is a flat, serializable stage table (stem, a run of inverted
residual stages, optional 1x1 head). Scaling a descriptor never mutates it;
every transform returns a new one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any

from .errors import ConfigError, DomainError, StructureError

Number = float | Fraction

STEM = "stem_conv"
MBCONV = "mbconv"
HEAD = "head"
OPERATOR_KINDS = (STEM, MBCONV, HEAD)

MIN_RESOLUTION = 32
DEFAULT_DIVISOR = 8
HF_RESOLUTIONS = (128, 256)


@dataclass(frozen=True)
class StageSpec:
    """One row of the stage table.

    expansion and se_ratio are only meaningful for mbconv rows; stem and head
    rows carry expansion=0 and se_ratio=0.0.
    """

    index: int
    operator_kind: str
    kernel: int
    expansion: int
    stride: int
    out_channels: int
    repeats: int
    se_ratio: float


@dataclass(frozen=True)
class Coeffs:
    """Scaling coefficients the descriptor was realized from (provenance only)."""

    w: float = 1.0
    d: float = 1.0
    r: float = 1.0


@dataclass(frozen=True)
class ArchDescriptor:
    name: str
    input_resolution: int
    num_classes: int
    coeffs: Coeffs
    stages: tuple[StageSpec, ...]


# kernel, expansion, stride, out_channels, repeats, kind --- the nine-stage
# reference network the whole candidate family is scaled down from.
_BASELINE_TABLE = (
    (3, 0, 2, 32, 1, STEM),
    (3, 1, 1, 16, 1, MBCONV),
    (3, 6, 2, 24, 2, MBCONV),
    (5, 6, 2, 40, 2, MBCONV),
    (3, 6, 2, 80, 3, MBCONV),
    (5, 6, 1, 112, 3, MBCONV),
    (5, 6, 2, 192, 4, MBCONV),
    (3, 6, 1, 320, 1, MBCONV),
    (1, 0, 1, 1280, 1, HEAD),
)

_SE_RATIO = 0.25


def baseline_b0(num_classes: int = 1000, input_resolution: int = 224) -> ArchDescriptor:
    """The unscaled reference network (EfficientNet-B0 stage table)."""
    stages = []
    for i, (kernel, expansion, stride, out_c, repeats, kind) in enumerate(_BASELINE_TABLE, start=1):
        se = _SE_RATIO if kind == MBCONV else 0.0
        stages.append(
            StageSpec(
                index=i,
                operator_kind=kind,
                kernel=kernel,
                expansion=expansion,
                stride=stride,
                out_channels=out_c,
                repeats=repeats,
                se_ratio=se,
            )
        )
    return ArchDescriptor(
        name="efficientnet-b0",
        input_resolution=input_resolution,
        num_classes=num_classes,
        coeffs=Coeffs(1.0, 1.0, 1.0),
        stages=tuple(stages),
    )


def round_channels(value: Number, divisor: int = DEFAULT_DIVISOR) -> int:
    """Round a fractional channel count to a hardware-friendly multiple.

    Standard convention for width-scaled networks: snap to the nearest
    multiple of `divisor` (never below it), then bump one step up if the snap
    lost more than 10% of the requested width. divisor=1 degenerates to plain
    half-up rounding with a floor of one channel.
    """
    if divisor < 1:
        raise DomainError(f"channel divisor must be >= 1, got {divisor}")
    if value <= 0:
        raise DomainError(f"channel count must be positive, got {value}")
    snapped = int(value + Fraction(divisor, 2)) // divisor * divisor
    snapped = max(divisor, snapped)
    if snapped < Fraction(9, 10) * value:
        snapped += divisor
    return snapped


def scale_repeats(repeats: int, depth_coeff: Number) -> int:
    """Depth scaling: shrink a repeat count, always keeping at least one block."""
    if repeats < 1:
        raise DomainError(f"repeats must be >= 1, got {repeats}")
    return max(1, math.ceil(repeats * depth_coeff))


def scale_resolution(base_resolution: int, resolution_coeff: Number) -> int:
    """Resolution scaling: ceiling, so the scaled side never collapses a pixel early."""
    return math.ceil(base_resolution * resolution_coeff)


def _check_coeff(label: str, value: Number) -> None:
    if not 0 < value <= 1:
        raise DomainError(f"coefficient {label}={float(value):.4f} outside (0, 1]: this engine only scales down")


def build_model(
    w: Number,
    d: Number,
    r: Number,
    *,
    base: ArchDescriptor | None = None,
    divisor: int = DEFAULT_DIVISOR,
    name: str | None = None,
) -> ArchDescriptor:
    """Realize a scaled-down variant of `base` from (width, depth, resolution) coefficients.

    Channel counts are width-scaled and rounded per `round_channels`; repeat
    counts are depth-scaled with a ceiling; the input side is resolution-scaled
    with a ceiling. Coefficients must lie in (0, 1]. Fractions are accepted and
    keep the arithmetic exact.
    """
    for label, value in (("w", w), ("d", d), ("r", r)):
        _check_coeff(label, value)
    if base is None:
        base = baseline_b0()

    resolution = scale_resolution(base.input_resolution, r)
    if resolution < MIN_RESOLUTION:
        raise DomainError(
            f"scaled input resolution {resolution} is below the stem minimum {MIN_RESOLUTION}"
        )

    stages = []
    for stage in base.stages:
        out_c = round_channels(stage.out_channels * w, divisor)
        repeats = scale_repeats(stage.repeats, d) if stage.operator_kind == MBCONV else stage.repeats
        stages.append(replace(stage, out_channels=out_c, repeats=repeats))

    if name is None:
        name = f"model-w{float(w):.4f}-d{float(d):.4f}-r{float(r):.4f}"
    return ArchDescriptor(
        name=name,
        input_resolution=resolution,
        num_classes=base.num_classes,
        coeffs=Coeffs(float(w), float(d), float(r)),
        stages=tuple(stages),
    )


def nearest_power_of_two(channels: int) -> int:
    """Nearest power of two; exact ties round DOWN. Pure integer arithmetic."""
    if channels < 1:
        raise DomainError(f"channel count must be >= 1, got {channels}")
    down = 1 << (channels.bit_length() - 1)
    if down == channels:
        return channels
    up = down << 1
    # strict <: the tie (equidistant) falls through to the smaller power
    if up - channels < channels - down:
        return up
    return down


def compound_round(arch: ArchDescriptor, suffix: str = "-p2") -> ArchDescriptor:
    """Snap every stage's channel count to its nearest power of two (ties down)."""
    stages = tuple(replace(s, out_channels=nearest_power_of_two(s.out_channels)) for s in arch.stages)
    return replace(arch, name=arch.name + suffix, stages=stages)


def hf_transform(
    arch: ArchDescriptor,
    resolution: int,
    allowed: tuple[int, ...] = HF_RESOLUTIONS,
) -> ArchDescriptor:
    """Hardware-friendly variant: power-of-two channels plus a power-of-two input side."""
    if resolution not in allowed:
        raise DomainError(f"hardware-friendly resolution {resolution} not in allowed set {allowed}")
    rounded = compound_round(arch, suffix=f"-hf{resolution}")
    return replace(rounded, input_resolution=resolution)


def stage_output_resolutions(arch: ArchDescriptor) -> tuple[int, ...]:
    """Feature-map side after each stage (stride applies on a stage's first block)."""
    side = arch.input_resolution
    sides = []
    for stage in arch.stages:
        side = math.ceil(side / stage.stride)
        sides.append(side)
    return tuple(sides)


def validate(arch: ArchDescriptor) -> None:
    """Check the stage chain is well formed; raise StructureError/DomainError if not.

    Rules: stages are 1-indexed and contiguous, the first stage is the stem,
    at most one head and only in last position, and every row's fields are in
    range for its operator kind.
    """
    if not arch.name:
        raise StructureError("descriptor name must be non-empty")
    if arch.input_resolution < MIN_RESOLUTION:
        raise DomainError(
            f"input resolution {arch.input_resolution} is below the stem minimum {MIN_RESOLUTION}"
        )
    if arch.num_classes < 1:
        raise DomainError(f"num_classes must be >= 1, got {arch.num_classes}")
    if not arch.stages:
        raise StructureError("descriptor has no stages")
    for pos, stage in enumerate(arch.stages, start=1):
        where = f"stage {stage.index} ({stage.operator_kind})"
        if stage.index != pos:
            raise StructureError(f"stage indices must be contiguous from 1; position {pos} holds index {stage.index}")
        if stage.operator_kind not in OPERATOR_KINDS:
            raise StructureError(f"stage {stage.index}: unknown operator_kind {stage.operator_kind!r}")
        if stage.kernel < 1 or stage.kernel % 2 == 0:
            raise StructureError(f"{where}: kernel must be odd and >= 1, got {stage.kernel}")
        if stage.stride not in (1, 2):
            raise StructureError(f"{where}: stride must be 1 or 2, got {stage.stride}")
        if stage.out_channels < 1:
            raise StructureError(f"{where}: out_channels must be >= 1, got {stage.out_channels}")
        if stage.repeats < 1:
            raise StructureError(f"{where}: repeats must be >= 1, got {stage.repeats}")
        if not 0.0 <= stage.se_ratio < 1.0:
            raise StructureError(f"{where}: se_ratio must be in [0, 1), got {stage.se_ratio}")
        if stage.operator_kind == MBCONV:
            if stage.expansion < 1:
                raise StructureError(f"{where}: expansion must be >= 1, got {stage.expansion}")
        else:
            if stage.expansion != 0:
                raise StructureError(f"{where}: expansion must be 0 for non-mbconv rows")
            if stage.repeats != 1:
                raise StructureError(f"{where}: stem/head rows cannot repeat")
    if arch.stages[0].operator_kind != STEM:
        raise StructureError(f"first stage must be {STEM}, got {arch.stages[0].operator_kind}")
    for stage in arch.stages[1:]:
        if stage.operator_kind == STEM:
            raise StructureError(f"stage {stage.index}: only stage 1 may be the stem")
    heads = [s for s in arch.stages if s.operator_kind == HEAD]
    if len(heads) > 1:
        raise StructureError("descriptor has more than one head stage")
    if heads and arch.stages[-1].operator_kind != HEAD:
        raise StructureError("head stage must come last")


_TOP_KEYS = {"name", "input_resolution", "num_classes", "coeffs", "stages"}
_COEFF_KEYS = {"w", "d", "r"}
_STAGE_KEYS = {"index", "operator_kind", "kernel", "expansion", "stride", "out_channels", "repeats", "se_ratio"}


def _require_keys(obj: dict[str, Any], expected: set[str], where: str) -> None:
    missing = expected - obj.keys()
    if missing:
        raise StructureError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = obj.keys() - expected
    if unknown:
        raise StructureError(f"{where}: unknown field(s) {sorted(unknown)}")


def _as_int(obj: dict[str, Any], key: str, where: str) -> int:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise StructureError(f"{where}: field {key!r} must be an integer, got {v!r}")
    return v


def _as_float(obj: dict[str, Any], key: str, where: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise StructureError(f"{where}: field {key!r} must be a number, got {v!r}")
    return float(v)


def from_dict(data: dict[str, Any]) -> ArchDescriptor:
    """Parse a descriptor from plain JSON data. Unknown fields are rejected."""
    if not isinstance(data, dict):
        raise StructureError(f"descriptor must be a JSON object, got {type(data).__name__}")
    _require_keys(data, _TOP_KEYS, "descriptor")
    if not isinstance(data["name"], str):
        raise StructureError("descriptor: field 'name' must be a string")
    coeffs_obj = data["coeffs"]
    if not isinstance(coeffs_obj, dict):
        raise StructureError("descriptor: field 'coeffs' must be an object")
    _require_keys(coeffs_obj, _COEFF_KEYS, "coeffs")
    stages_obj = data["stages"]
    if not isinstance(stages_obj, list):
        raise StructureError("descriptor: field 'stages' must be an array")
    stages = []
    for n, row in enumerate(stages_obj, start=1):
        where = f"stages[{n - 1}]"
        if not isinstance(row, dict):
            raise StructureError(f"{where}: must be an object")
        _require_keys(row, _STAGE_KEYS, where)
        kind = row["operator_kind"]
        if not isinstance(kind, str):
            raise StructureError(f"{where}: field 'operator_kind' must be a string")
        stages.append(
            StageSpec(
                index=_as_int(row, "index", where),
                operator_kind=kind,
                kernel=_as_int(row, "kernel", where),
                expansion=_as_int(row, "expansion", where),
                stride=_as_int(row, "stride", where),
                out_channels=_as_int(row, "out_channels", where),
                repeats=_as_int(row, "repeats", where),
                se_ratio=_as_float(row, "se_ratio", where),
            )
        )
    arch = ArchDescriptor(
        name=data["name"],
        input_resolution=_as_int(data, "input_resolution", "descriptor"),
        num_classes=_as_int(data, "num_classes", "descriptor"),
        coeffs=Coeffs(
            w=_as_float(coeffs_obj, "w", "coeffs"),
            d=_as_float(coeffs_obj, "d", "coeffs"),
            r=_as_float(coeffs_obj, "r", "coeffs"),
        ),
        stages=tuple(stages),
    )
    validate(arch)
    return arch


def to_dict(arch: ArchDescriptor) -> dict[str, Any]:
    return {
        "name": arch.name,
        "input_resolution": arch.input_resolution,
        "num_classes": arch.num_classes,
        "coeffs": {"w": arch.coeffs.w, "d": arch.coeffs.d, "r": arch.coeffs.r},
        "stages": [
            {
                "index": s.index,
                "operator_kind": s.operator_kind,
                "kernel": s.kernel,
                "expansion": s.expansion,
                "stride": s.stride,
                "out_channels": s.out_channels,
                "repeats": s.repeats,
                "se_ratio": s.se_ratio,
            }
            for s in arch.stages
        ],
    }


def load_descriptor(path: str) -> ArchDescriptor:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read descriptor {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"descriptor {path} is not valid JSON: {exc}") from exc
    return from_dict(data)


def save_descriptor(arch: ArchDescriptor, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(arch), fh, indent=2, sort_keys=True)
        fh.write("\n")
