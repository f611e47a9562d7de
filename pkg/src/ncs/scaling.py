"""Derivation of the scaling-down ladders (depth, width, resolution).

All coefficients are exact rationals internally; rendering to 4 decimals
happens only at the reporting boundary. The depth ladder is derived first by
searching for the smallest 0.1-step that strictly reduces the total operator
count; width and resolution then follow the fixed step proportions
dw : dd : dr = 1.1 : 1.2 : 1.15, anchored to the realized depth step
dd = t[u+1] / t[u].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .arch import MBCONV, ArchDescriptor, baseline_b0, scale_resolution
from .errors import DomainError

log = logging.getLogger(__name__)

DEPTH_STEP = Fraction(1, 10)
# per-step multipliers implied by dw : dd : dr = 1.1 : 1.2 : 1.15
WIDTH_PER_DEPTH = Fraction(11, 12)
RESOLUTION_PER_DEPTH = Fraction(23, 24)

DEFAULT_MAX_INDEX = 4
DEFAULT_BASE_RESOLUTION = 224


@dataclass(frozen=True)
class ScalingLadder:
    """One rung per scaling index; rung 1 is always the unscaled baseline."""

    max_index: int
    base_resolution: int
    depth_coeffs: tuple[Fraction, ...]
    operator_totals: tuple[int, ...]
    width_coeffs: tuple[Fraction, ...]
    resolution_coeffs: tuple[Fraction, ...]
    resolutions: tuple[int, ...]
    truncated: bool

    @property
    def size(self) -> int:
        return len(self.depth_coeffs)


def operator_total(repeats: Sequence[int], depth_coeff: Fraction, fixed_stages: int) -> int:
    """Total operator count at a given depth coefficient (ceiling per stage)."""
    return fixed_stages + sum(math.ceil(r * depth_coeff) for r in repeats)


def derive_depth_ladder(
    baseline_repeats: Sequence[int],
    max_index: int,
    *,
    fixed_stages: int = 2,
) -> tuple[list[Fraction], list[int]]:
    """Depth coefficients d_1=1 > d_2 > ... in 0.1 steps, each the largest value
    that strictly reduces the total operator count below the previous rung's.

    Returns (depth_coeffs, operator_totals), both of length <= max_index. A
    shorter result means the positive range was exhausted (no further strict
    reduction exists); callers surface that as a truncated ladder.
    """
    if max_index < 1:
        raise DomainError(f"max_index must be >= 1, got {max_index}")
    if not baseline_repeats:
        raise DomainError("baseline_repeats must be non-empty")
    if any(r < 1 for r in baseline_repeats):
        raise DomainError(f"baseline repeats must all be >= 1, got {list(baseline_repeats)}")
    if fixed_stages < 0:
        raise DomainError(f"fixed_stages must be >= 0, got {fixed_stages}")

    coeffs = [Fraction(1)]
    totals = [operator_total(baseline_repeats, Fraction(1), fixed_stages)]
    while len(coeffs) < max_index:
        prev_d, prev_t = coeffs[-1], totals[-1]
        found = None
        step = 1
        while True:
            d = prev_d - step * DEPTH_STEP
            if d <= 0:
                break
            t = operator_total(baseline_repeats, d, fixed_stages)
            if t < prev_t:
                found = (d, t)
                break
            step += 1
        if found is None:
            break
        coeffs.append(found[0])
        totals.append(found[1])
    return coeffs, totals


def derive_wr_ladder(operator_totals: Sequence[int]) -> tuple[list[Fraction], list[Fraction]]:
    """Width and resolution coefficients chained off the realized depth steps.

    Each step scales width by (11/12) * (t[u+1]/t[u]) and resolution by
    (23/24) * (t[u+1]/t[u]), keeping the three reductions in the fixed
    1.1 : 1.2 : 1.15 proportion.
    """
    if not operator_totals:
        raise DomainError("operator_totals must be non-empty")
    if any(t < 1 for t in operator_totals):
        raise DomainError(f"operator totals must all be >= 1, got {list(operator_totals)}")
    for a, b in zip(operator_totals, operator_totals[1:]):
        if b >= a:
            raise DomainError(f"operator totals must strictly decrease, got {a} -> {b}")
    widths = [Fraction(1)]
    resolutions = [Fraction(1)]
    for a, b in zip(operator_totals, operator_totals[1:]):
        depth_step = Fraction(b, a)
        widths.append(widths[-1] * WIDTH_PER_DEPTH * depth_step)
        resolutions.append(resolutions[-1] * RESOLUTION_PER_DEPTH * depth_step)
    return widths, resolutions


def resolutions_from_coeffs(
    resolution_coeffs: Sequence[Fraction],
    base_resolution: int = DEFAULT_BASE_RESOLUTION,
) -> list[int]:
    """Realized input sides: ceiling(base * r), so a rung never loses an extra pixel."""
    if base_resolution < 1:
        raise DomainError(f"base resolution must be >= 1, got {base_resolution}")
    for r in resolution_coeffs:
        if not 0 < r <= 1:
            raise DomainError(f"resolution coefficient {float(r):.4f} outside (0, 1]")
    return [scale_resolution(base_resolution, r) for r in resolution_coeffs]


def derive_ladder(
    max_index: int = DEFAULT_MAX_INDEX,
    base_resolution: int = DEFAULT_BASE_RESOLUTION,
    base: ArchDescriptor | None = None,
) -> ScalingLadder:
    """Full ladder for a baseline network: depth first, then width/resolution."""
    if base is None:
        base = baseline_b0(input_resolution=base_resolution)
    repeats = [s.repeats for s in base.stages if s.operator_kind == MBCONV]
    fixed = len(base.stages) - len(repeats)
    depth, totals = derive_depth_ladder(repeats, max_index, fixed_stages=fixed)
    widths, res_coeffs = derive_wr_ladder(totals)
    truncated = len(depth) < max_index
    if truncated:
        log.warning(
            "depth ladder exhausted after %d of %d rungs; returning a truncated ladder",
            len(depth),
            max_index,
        )
    return ScalingLadder(
        max_index=max_index,
        base_resolution=base_resolution,
        depth_coeffs=tuple(depth),
        operator_totals=tuple(totals),
        width_coeffs=tuple(widths),
        resolution_coeffs=tuple(res_coeffs),
        resolutions=tuple(resolutions_from_coeffs(res_coeffs, base_resolution)),
        truncated=truncated,
    )


def ladder_rows(ladder: ScalingLadder) -> list[dict]:
    """Row-per-rung view with coefficients rendered to 4 decimals."""
    rows = []
    for i in range(ladder.size):
        rows.append(
            {
                "index": i + 1,
                "d": round(float(ladder.depth_coeffs[i]), 4),
                "t": ladder.operator_totals[i],
                "w": round(float(ladder.width_coeffs[i]), 4),
                "r": round(float(ladder.resolution_coeffs[i]), 4),
                "resolution": ladder.resolutions[i],
            }
        )
    return rows


def ladder_to_dict(ladder: ScalingLadder) -> dict:
    return {
        "max_index": ladder.max_index,
        "base_resolution": ladder.base_resolution,
        "truncated": ladder.truncated,
        "rungs": ladder_rows(ladder),
    }
