"""Candidate pool: enumeration over the ladder, standardized costs, grouping.

Pools are immutable lists of frozen candidates; standardize/group return new
objects and never mutate their inputs.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, replace
from typing import Any, Sequence

from . import arch as arch_mod
from .arch import ArchDescriptor, build_model, hf_transform
from .cost import cost_batch
from .errors import ConfigError, DomainError
from .scaling import ScalingLadder


@dataclass(frozen=True)
class Candidate:
    id: str
    w_index: int
    d_index: int
    r_index: int
    arch: ArchDescriptor
    params: int
    macs: int
    hf_resolution: int | None = None
    z_params: float | None = None
    z_macs: float | None = None
    z_sum: float | None = None


@dataclass(frozen=True)
class PoolStats:
    n: int
    params_mean: float
    params_sd: float
    macs_mean: float
    macs_sd: float


@dataclass(frozen=True)
class Group:
    group_id: int
    member_ids: tuple[str, ...]


def generate_pool(
    ladder: ScalingLadder,
    *,
    divisor: int = arch_mod.DEFAULT_DIVISOR,
    base: ArchDescriptor | None = None,
    hf: bool = False,
    hf_resolutions: tuple[int, ...] = arch_mod.HF_RESOLUTIONS,
) -> list[Candidate]:
    """Enumerate candidates over the ladder.

    Standard pool: every (w_i, d_j, r_k) triple, size**3 candidates, ids
    "w{i}_d{j}_r{k}" in lexicographic index order. The unscaled baseline
    (w1, d1, r1) is included; grouping decides its fate like any other entry.

    Hardware-friendly pool (hf=True): every (w_i, d_j) pair crossed with the
    allowed power-of-two input sides, channels snapped to powers of two, ids
    "hf_w{i}_d{j}_r{resolution}".
    """
    n = ladder.size
    entries: list[tuple[str, int, int, int, int | None, ArchDescriptor]] = []
    if not hf:
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                for k in range(1, n + 1):
                    model = build_model(
                        ladder.width_coeffs[i - 1],
                        ladder.depth_coeffs[j - 1],
                        ladder.resolution_coeffs[k - 1],
                        base=base,
                        divisor=divisor,
                        name=f"Model(w{i},d{j},r{k})",
                    )
                    entries.append((f"w{i}_d{j}_r{k}", i, j, k, None, model))
    else:
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                for resolution in hf_resolutions:
                    model = build_model(
                        ladder.width_coeffs[i - 1],
                        ladder.depth_coeffs[j - 1],
                        1,
                        base=base,
                        divisor=divisor,
                        name=f"Model(w{i},d{j})",
                    )
                    model = hf_transform(model, resolution, allowed=hf_resolutions)
                    entries.append((f"hf_w{i}_d{j}_r{resolution}", i, j, 0, resolution, model))
    reports = cost_batch([e[5] for e in entries])
    return [
        Candidate(
            id=cid,
            w_index=i,
            d_index=j,
            r_index=k,
            arch=model,
            params=rep.params,
            macs=rep.macs,
            hf_resolution=hf_res,
        )
        for (cid, i, j, k, hf_res, model), rep in zip(entries, reports)
    ]


def pool_stats(pool: Sequence[Candidate]) -> PoolStats:
    """Population mean and standard deviation of both cost axes."""
    if len(pool) < 2:
        raise DomainError(f"pool must have at least 2 candidates to standardize, got {len(pool)}")
    params = [c.params for c in pool]
    macs = [c.macs for c in pool]
    return PoolStats(
        n=len(pool),
        params_mean=statistics.fmean(params),
        params_sd=statistics.pstdev(params),
        macs_mean=statistics.fmean(macs),
        macs_sd=statistics.pstdev(macs),
    )


def standardize(pool: Sequence[Candidate]) -> tuple[list[Candidate], PoolStats]:
    """Attach z-scores: z_params + z_macs, both standardized over the pool.

    Uses the population standard deviation. A degenerate axis (zero spread)
    has no defined z-score and raises DomainError.
    """
    stats = pool_stats(pool)
    if stats.params_sd == 0:
        raise DomainError("degenerate pool: zero spread on the params axis")
    if stats.macs_sd == 0:
        raise DomainError("degenerate pool: zero spread on the MACs axis")
    out = []
    for c in pool:
        zp = (c.params - stats.params_mean) / stats.params_sd
        zm = (c.macs - stats.macs_mean) / stats.macs_sd
        out.append(replace(c, z_params=zp, z_macs=zm, z_sum=zp + zm))
    return out, stats


def group(pool: Sequence[Candidate], n_groups: int) -> list[Group]:
    """Partition a standardized pool into contiguous resource-usage bins.

    Candidates are ordered by descending z_sum (ties: larger params first,
    then id ascending) and cut into n_groups contiguous runs; when the pool
    does not divide evenly the leftover slots go to the earliest (heaviest)
    groups, so sizes differ by at most one.
    """
    if n_groups < 1:
        raise DomainError(f"n_groups must be >= 1, got {n_groups}")
    if n_groups > len(pool):
        raise DomainError(f"cannot split {len(pool)} candidates into {n_groups} groups")
    if any(c.z_sum is None for c in pool):
        raise DomainError("pool has no z-scores: standardize before grouping")
    ordered = sorted(pool, key=lambda c: (-c.z_sum, -c.params, c.id))
    q, rem = divmod(len(ordered), n_groups)
    groups = []
    start = 0
    for g in range(n_groups):
        size = q + (1 if g < rem else 0)
        members = ordered[start : start + size]
        groups.append(Group(group_id=g + 1, member_ids=tuple(c.id for c in members)))
        start += size
    return groups


# --- serialization ---------------------------------------------------------


def candidate_to_dict(c: Candidate) -> dict[str, Any]:
    return {
        "id": c.id,
        "w_index": c.w_index,
        "d_index": c.d_index,
        "r_index": c.r_index,
        "hf_resolution": c.hf_resolution,
        "params": c.params,
        "macs": c.macs,
        "z_params": c.z_params,
        "z_macs": c.z_macs,
        "z_sum": c.z_sum,
        "arch": arch_mod.to_dict(c.arch),
    }


def candidate_from_dict(data: dict[str, Any]) -> Candidate:
    try:
        return Candidate(
            id=data["id"],
            w_index=data["w_index"],
            d_index=data["d_index"],
            r_index=data["r_index"],
            hf_resolution=data.get("hf_resolution"),
            params=data["params"],
            macs=data["macs"],
            z_params=data.get("z_params"),
            z_macs=data.get("z_macs"),
            z_sum=data.get("z_sum"),
            arch=arch_mod.from_dict(data["arch"]),
        )
    except KeyError as exc:
        raise ConfigError(f"candidate record missing field {exc}") from exc


def stats_to_dict(stats: PoolStats) -> dict[str, Any]:
    return {
        "n": stats.n,
        "params_mean": stats.params_mean,
        "params_sd": stats.params_sd,
        "macs_mean": stats.macs_mean,
        "macs_sd": stats.macs_sd,
    }


def save_pool(
    path: str,
    pool: Sequence[Candidate],
    stats: PoolStats | None = None,
    extra: dict[str, Any] | None = None,
) -> None:
    doc: dict[str, Any] = dict(extra or {})
    doc["stats"] = stats_to_dict(stats) if stats else None
    doc["candidates"] = [candidate_to_dict(c) for c in pool]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pool(path: str) -> list[Candidate]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read pool {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"pool {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "candidates" not in doc:
        raise ConfigError(f"pool {path}: expected an object with a 'candidates' array")
    return [candidate_from_dict(rec) for rec in doc["candidates"]]


def save_groups(path: str, groups: Sequence[Group], extra: dict[str, Any] | None = None) -> None:
    doc: dict[str, Any] = dict(extra or {})
    doc["n_groups"] = len(groups)
    doc["groups"] = [{"group_id": g.group_id, "member_ids": list(g.member_ids)} for g in groups]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_groups(path: str) -> list[Group]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read groups {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"groups {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "groups" not in doc:
        raise ConfigError(f"groups {path}: expected an object with a 'groups' array")
    out = []
    for rec in doc["groups"]:
        try:
            out.append(Group(group_id=rec["group_id"], member_ids=tuple(rec["member_ids"])))
        except KeyError as exc:
            raise ConfigError(f"group record missing field {exc}") from exc
    return out
