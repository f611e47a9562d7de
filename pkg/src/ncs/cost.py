"""Analytic parameter and multiply-accumulate counts for a descriptor.

Counting conventions (stated in every report):
  * 1 MAC = 1 FLOP.
  * Convolutions followed by batchnorm carry no bias; batchnorm itself counts
    2 trainable parameters per channel and no MACs.
  * The squeeze-excitation block's two 1x1 convs are biased; its global pool
    and channel rescale are counted as MACs (one accumulate / one multiply per
    element).
  * The classifier head counts its global average pool as MACs and a biased
    fully connected layer.
  * Residual adds are free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .arch import HEAD, MBCONV, STEM, ArchDescriptor, validate
from .errors import NcsError, StructureError

CONVENTION_NOTE = (
    "1 MAC = 1 FLOP; batchnorm adds 2 params per channel and no MACs; "
    "squeeze-excitation pool and rescale count as MACs; residual adds are free"
)

IMAGE_CHANNELS = 3


@dataclass(frozen=True)
class StageCost:
    stage_index: int
    operator_kind: str
    params: int
    macs: int
    output_resolution: int


@dataclass(frozen=True)
class CostReport:
    name: str
    params: int
    macs: int
    stages: tuple[StageCost, ...]
    convention_note: str = CONVENTION_NOTE


def se_channels(block_in_channels: int, se_ratio: float) -> int:
    """Squeeze width: a fixed fraction of the block's INPUT channels, floor 1."""
    return max(1, int(block_in_channels * se_ratio))


def _conv(out_side: int, in_c: int, out_c: int, kernel: int, groups: int = 1, bias: bool = False) -> tuple[int, int]:
    """(params, macs) of a conv producing an out_side x out_side x out_c map."""
    params = kernel * kernel * (in_c // groups) * out_c + (out_c if bias else 0)
    macs = out_side * out_side * out_c * kernel * kernel * (in_c // groups)
    return params, macs


def _bn(channels: int) -> tuple[int, int]:
    return 2 * channels, 0


def _mbconv_block(
    in_c: int, out_c: int, kernel: int, expansion: int, stride: int, se_ratio: float, in_side: int
) -> tuple[int, int, int]:
    """(params, macs, out_side) for one inverted residual block."""
    params = 0
    macs = 0
    mid = in_c * expansion
    side = in_side
    if expansion != 1:
        p, m = _conv(side, in_c, mid, 1)
        params += p + 2 * mid
        macs += m
    out_side = math.ceil(side / stride)
    p, m = _conv(out_side, 1, mid, kernel, groups=1)  # depthwise: 1 input channel per group
    params += p + 2 * mid
    macs += m
    if se_ratio > 0:
        sq = se_channels(in_c, se_ratio)
        macs += out_side * out_side * mid  # global pool accumulates
        p, m = _conv(1, mid, sq, 1, bias=True)
        params += p
        macs += m
        p, m = _conv(1, sq, mid, 1, bias=True)
        params += p
        macs += m
        macs += out_side * out_side * mid  # channel rescale
    p, m = _conv(out_side, mid, out_c, 1)
    params += p + 2 * out_c
    macs += m
    return params, macs, out_side


def cost(arch: ArchDescriptor) -> CostReport:
    """Walk the stage chain and total parameters and MACs, per stage and overall."""
    validate(arch)
    stages: list[StageCost] = []
    side = arch.input_resolution
    in_c = IMAGE_CHANNELS
    total_params = 0
    total_macs = 0
    for stage in arch.stages:
        s_params = 0
        s_macs = 0
        if stage.operator_kind == STEM:
            side = math.ceil(side / stage.stride)
            p, m = _conv(side, in_c, stage.out_channels, stage.kernel)
            s_params = p + 2 * stage.out_channels
            s_macs = m
            in_c = stage.out_channels
        elif stage.operator_kind == MBCONV:
            for rep in range(stage.repeats):
                stride = stage.stride if rep == 0 else 1
                block_in = in_c if rep == 0 else stage.out_channels
                p, m, side = _mbconv_block(
                    block_in, stage.out_channels, stage.kernel, stage.expansion, stride, stage.se_ratio, side
                )
                s_params += p
                s_macs += m
            in_c = stage.out_channels
        elif stage.operator_kind == HEAD:
            p, m = _conv(side, in_c, stage.out_channels, stage.kernel)
            s_params += p + 2 * stage.out_channels
            s_macs += m
            s_macs += side * side * stage.out_channels  # global average pool
            s_params += stage.out_channels * arch.num_classes + arch.num_classes
            s_macs += stage.out_channels * arch.num_classes
            in_c = stage.out_channels
        else:  # pragma: no cover - validate() already rejects unknown kinds
            raise StructureError(f"stage {stage.index}: unknown operator_kind {stage.operator_kind!r}")
        stages.append(
            StageCost(
                stage_index=stage.index,
                operator_kind=stage.operator_kind,
                params=s_params,
                macs=s_macs,
                output_resolution=side,
            )
        )
        total_params += s_params
        total_macs += s_macs
    return CostReport(name=arch.name, params=total_params, macs=total_macs, stages=tuple(stages))


def cost_batch(archs: list[ArchDescriptor]) -> list[CostReport]:
    """Cost many descriptors in order; the first failure aborts, naming the index."""
    reports = []
    for i, arch in enumerate(archs):
        try:
            reports.append(cost(arch))
        except NcsError as exc:
            raise type(exc)(f"batch item {i} ({arch.name}): {exc}") from exc
    return reports


def report_to_dict(report: CostReport, per_stage: bool = False) -> dict:
    data = {
        "name": report.name,
        "params": report.params,
        "macs": report.macs,
        "convention_note": report.convention_note,
    }
    if per_stage:
        data["stages"] = [
            {
                "index": s.stage_index,
                "operator_kind": s.operator_kind,
                "params": s.params,
                "macs": s.macs,
                "output_resolution": s.output_resolution,
            }
            for s in report.stages
        ]
    return data
