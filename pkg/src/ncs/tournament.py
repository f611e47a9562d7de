"""Elimination tournament over grouped candidates, with resumable state.

Accuracy bookkeeping starts at epoch 1. Each round trains every survivor for
`epochs_per_round` epochs; after a round on the elimination cadence, the
bottom floor(n/2) of each group (by average accuracy over all epochs so far)
is dropped. Checkpoints are written atomically and serialization is
canonical, so a stop/resume run is bit-for-bit identical to a straight run.
"""

from __future__ import annotations

import json
import math
import os
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .errors import ConfigError, DomainError, EvaluatorError, InvariantError
from .pool import Candidate, Group

Criterion = str  # "specific" | "average"
CRITERIA = ("specific", "average")

DEFAULT_EPOCHS_PER_ROUND = 10
DEFAULT_TOTAL_EPOCHS = 350


# --- ranking ---------------------------------------------------------------


def avg_accuracy(epoch_acc: Sequence[float], upto_epoch: int) -> float:
    """Mean accuracy over epochs 1..upto_epoch."""
    if not 1 <= upto_epoch <= len(epoch_acc):
        raise DomainError(f"upto_epoch {upto_epoch} outside trace of length {len(epoch_acc)}")
    return statistics.fmean(epoch_acc[:upto_epoch])


def rank(traces: Mapping[str, Sequence[float]], upto_epoch: int, criterion: Criterion) -> list[str]:
    """Candidate ids best-first at a given epoch.

    criterion "specific" ranks by the accuracy AT upto_epoch, "average" by the
    mean over epochs 1..upto_epoch. Descending; ties break by id ascending.
    """
    if criterion not in CRITERIA:
        raise DomainError(f"unknown ranking criterion {criterion!r}; expected one of {CRITERIA}")
    if not traces:
        raise DomainError("cannot rank an empty set of traces")
    scores: dict[str, float] = {}
    for cid, acc in traces.items():
        if len(acc) < upto_epoch:
            raise DomainError(
                f"candidate {cid}: trace has {len(acc)} epochs, need {upto_epoch} to rank"
            )
        scores[cid] = acc[upto_epoch - 1] if criterion == "specific" else avg_accuracy(acc, upto_epoch)
    return sorted(scores, key=lambda cid: (-scores[cid], cid))


def match_counts(
    traces: Mapping[str, Sequence[float]], epochs_per_round: int, criterion: Criterion
) -> tuple[int, int]:
    """(matching rounds, total rounds) against the final-epoch specific ranking.

    All traces must share one length that divides evenly into rounds; the
    final round itself is included in the count (it always matches under the
    "specific" criterion at the final epoch).
    """
    if epochs_per_round < 1:
        raise DomainError(f"epochs_per_round must be >= 1, got {epochs_per_round}")
    if not traces:
        raise DomainError("cannot compute match percentage without traces")
    lengths = {len(acc) for acc in traces.values()}
    if len(lengths) != 1:
        raise DomainError(f"traces must all have the same length, got lengths {sorted(lengths)}")
    (length,) = lengths
    if length == 0 or length % epochs_per_round != 0:
        raise DomainError(
            f"trace length {length} does not divide into whole rounds of {epochs_per_round}"
        )
    n_rounds = length // epochs_per_round
    final_ranking = rank(traces, length, "specific")
    hits = sum(
        1
        for r in range(1, n_rounds + 1)
        if rank(traces, r * epochs_per_round, criterion) == final_ranking
    )
    return hits, n_rounds


def match_percentage(
    traces: Mapping[str, Sequence[float]], epochs_per_round: int, criterion: Criterion
) -> Fraction:
    """Match counts as an exact rational in [0, 1]."""
    hits, n_rounds = match_counts(traces, epochs_per_round, criterion)
    return Fraction(hits, n_rounds)


def rank_metrics(traces: Mapping[str, Sequence[float]], epochs_per_round: int) -> dict[str, Any]:
    """Both match percentages plus the reference (final specific) ranking."""
    spe_hits, n_rounds = match_counts(traces, epochs_per_round, "specific")
    avg_hits, _ = match_counts(traces, epochs_per_round, "average")
    length = len(next(iter(traces.values())))
    return {
        "epochs_per_round": epochs_per_round,
        "rounds": n_rounds,
        "final_ranking": rank(traces, length, "specific"),
        "p_specific": {"fraction": f"{spe_hits}/{n_rounds}", "value": spe_hits / n_rounds},
        "p_average": {"fraction": f"{avg_hits}/{n_rounds}", "value": avg_hits / n_rounds},
    }


# --- state -----------------------------------------------------------------


@dataclass(frozen=True)
class Elimination:
    candidate_id: str
    at_round: int


@dataclass(frozen=True)
class GroupState:
    group_id: int
    survivors: tuple[str, ...]
    eliminated: tuple[Elimination, ...] = ()


@dataclass(frozen=True)
class TournamentState:
    """Snapshot after `rounds_done` completed rounds (0 = nothing trained yet)."""

    rounds_done: int
    epochs_per_round: int
    total_epochs: int
    elimination_cadence: int
    rng_seed: int
    cost_ledger: int
    groups: tuple[GroupState, ...]
    history: dict[str, tuple[float, ...]] = field(default_factory=dict)

    @property
    def total_rounds(self) -> int:
        return self.total_epochs // self.epochs_per_round

    @property
    def complete(self) -> bool:
        return self.rounds_done >= self.total_rounds


def initial_state(
    groups: Sequence[Group],
    *,
    epochs_per_round: int = DEFAULT_EPOCHS_PER_ROUND,
    total_epochs: int = DEFAULT_TOTAL_EPOCHS,
    elimination_cadence: int = 1,
    rng_seed: int = 1,
) -> TournamentState:
    if epochs_per_round < 1:
        raise DomainError(f"epochs_per_round must be >= 1, got {epochs_per_round}")
    if total_epochs < epochs_per_round or total_epochs % epochs_per_round != 0:
        raise DomainError(
            f"total_epochs {total_epochs} must be a positive multiple of epochs_per_round {epochs_per_round}"
        )
    if elimination_cadence < 1:
        raise DomainError(f"elimination_cadence must be >= 1, got {elimination_cadence}")
    if not groups:
        raise DomainError("tournament needs at least one group")
    seen: set[str] = set()
    gids: set[int] = set()
    for g in groups:
        if g.group_id in gids:
            raise DomainError(f"duplicate group_id {g.group_id}")
        gids.add(g.group_id)
        if not g.member_ids:
            raise DomainError(f"group {g.group_id} is empty")
        for cid in g.member_ids:
            if cid in seen:
                raise DomainError(f"candidate {cid} appears in more than one group")
            seen.add(cid)
    return TournamentState(
        rounds_done=0,
        epochs_per_round=epochs_per_round,
        total_epochs=total_epochs,
        elimination_cadence=elimination_cadence,
        rng_seed=rng_seed,
        cost_ledger=0,
        groups=tuple(GroupState(g.group_id, tuple(g.member_ids)) for g in groups),
        history={},
    )


def _group_traces(state: TournamentState, group: GroupState) -> dict[str, Sequence[float]]:
    return {cid: state.history[cid] for cid in group.survivors}


def run_round(
    state: TournamentState,
    evaluator: "EvaluatorLike",
    candidates: Mapping[str, Candidate],
) -> TournamentState:
    """Train every survivor for one round and return the advanced state.

    Evaluation jobs are issued in canonical candidate order (sorted ids) and
    results are merged back positionally, so parallel evaluators cannot
    reorder anything. Any evaluator failure propagates before the state is
    touched, leaving the caller's checkpoint as it was.
    """
    if state.complete:
        raise DomainError(
            f"tournament already complete: {state.rounds_done} rounds of {state.epochs_per_round} epochs"
        )
    this_round = state.rounds_done + 1
    e = state.epochs_per_round
    survivor_ids = sorted(cid for g in state.groups for cid in g.survivors)
    jobs = []
    for cid in survivor_ids:
        if cid not in candidates:
            raise ConfigError(f"candidate {cid} is in the tournament but not in the pool")
        have = len(state.history.get(cid, ()))
        if have != state.rounds_done * e:
            raise InvariantError(
                f"candidate {cid}: history holds {have} epochs before round {this_round}, expected {state.rounds_done * e}"
            )
        jobs.append((candidates[cid], have, e))
    results = evaluator.evaluate_batch(jobs)
    if len(results) != len(jobs):
        raise EvaluatorError(f"evaluator returned {len(results)} results for {len(jobs)} jobs")
    history = dict(state.history)
    for (cand, _, _), values in zip(jobs, results):
        if len(values) != e:
            raise EvaluatorError(
                f"evaluator returned {len(values)} epochs for candidate {cand.id}, expected {e}"
            )
        for v in values:
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise EvaluatorError(f"candidate {cand.id}: non-finite accuracy value {v!r}")
        history[cand.id] = tuple(state.history.get(cand.id, ())) + tuple(float(v) for v in values)
    return TournamentState(
        rounds_done=this_round,
        epochs_per_round=e,
        total_epochs=state.total_epochs,
        elimination_cadence=state.elimination_cadence,
        rng_seed=state.rng_seed,
        cost_ledger=state.cost_ledger + e * len(jobs),
        groups=state.groups,
        history=history,
    )


def eliminate(state: TournamentState) -> TournamentState:
    """Drop the bottom floor(n/2) of every group by average accuracy so far.

    Groups already down to one survivor are untouched. An eliminated
    candidate's average accuracy at this round is <= every surviving
    group-mate's (ties break by id, ascending ids survive first).
    """
    if state.rounds_done == 0:
        raise DomainError("cannot eliminate before any round has been trained")
    upto = state.rounds_done * state.epochs_per_round
    new_groups = []
    for g in state.groups:
        n = len(g.survivors)
        if n <= 1:
            new_groups.append(g)
            continue
        order = rank(_group_traces(state, g), upto, "average")
        keep = set(order[: math.ceil(n / 2)])
        dropped = [cid for cid in order if cid not in keep]
        new_groups.append(
            GroupState(
                group_id=g.group_id,
                survivors=tuple(cid for cid in g.survivors if cid in keep),
                eliminated=g.eliminated
                + tuple(Elimination(cid, state.rounds_done) for cid in dropped),
            )
        )
    return TournamentState(
        rounds_done=state.rounds_done,
        epochs_per_round=state.epochs_per_round,
        total_epochs=state.total_epochs,
        elimination_cadence=state.elimination_cadence,
        rng_seed=state.rng_seed,
        cost_ledger=state.cost_ledger,
        groups=tuple(new_groups),
        history=state.history,
    )


def champions(state: TournamentState) -> dict[int, str]:
    """One champion per group; only defined once the tournament is complete."""
    if not state.complete:
        raise DomainError(
            f"tournament not complete: {state.rounds_done}/{state.total_rounds} rounds done"
        )
    out: dict[int, str] = {}
    for g in state.groups:
        if len(g.survivors) == 1:
            out[g.group_id] = g.survivors[0]
        else:
            out[g.group_id] = rank(_group_traces(state, g), state.total_epochs, "average")[0]
    return out


def run_search(
    state: TournamentState,
    evaluator: "EvaluatorLike",
    candidates: Mapping[str, Candidate],
    *,
    checkpoint_path: str | None = None,
    max_rounds: int | None = None,
) -> TournamentState:
    """Advance the tournament to completion (or max_rounds), checkpointing each round.

    Elimination happens after every round whose number is a multiple of the
    cadence; a group keeps shrinking until one candidate remains, which then
    trains alone until total_epochs.
    """
    rounds_this_call = 0
    while not state.complete:
        if max_rounds is not None and rounds_this_call >= max_rounds:
            break
        state = run_round(state, evaluator, candidates)
        if state.rounds_done % state.elimination_cadence == 0:
            state = eliminate(state)
        if checkpoint_path is not None:
            save_state(state, checkpoint_path)
        rounds_this_call += 1
    return state


# --- serialization ---------------------------------------------------------

_STATE_KEYS = {
    "rounds_done",
    "epochs_per_round",
    "total_epochs",
    "elimination_cadence",
    "rng_seed",
    "cost_ledger",
    "groups",
    "history",
}


def state_to_dict(state: TournamentState) -> dict[str, Any]:
    return {
        "rounds_done": state.rounds_done,
        "epochs_per_round": state.epochs_per_round,
        "total_epochs": state.total_epochs,
        "elimination_cadence": state.elimination_cadence,
        "rng_seed": state.rng_seed,
        "cost_ledger": state.cost_ledger,
        "groups": [
            {
                "group_id": g.group_id,
                "survivors": list(g.survivors),
                "eliminated": [
                    {"candidate_id": e.candidate_id, "at_round": e.at_round} for e in g.eliminated
                ],
            }
            for g in state.groups
        ],
        "history": {cid: list(acc) for cid, acc in state.history.items()},
    }


def state_from_dict(data: dict[str, Any]) -> TournamentState:
    if not isinstance(data, dict):
        raise ConfigError(f"state must be a JSON object, got {type(data).__name__}")
    missing = _STATE_KEYS - data.keys()
    if missing:
        raise ConfigError(f"state missing field(s) {sorted(missing)}")
    unknown = data.keys() - _STATE_KEYS
    if unknown:
        raise ConfigError(f"state has unknown field(s) {sorted(unknown)}")
    try:
        groups = tuple(
            GroupState(
                group_id=g["group_id"],
                survivors=tuple(g["survivors"]),
                eliminated=tuple(Elimination(e["candidate_id"], e["at_round"]) for e in g["eliminated"]),
            )
            for g in data["groups"]
        )
        state = TournamentState(
            rounds_done=data["rounds_done"],
            epochs_per_round=data["epochs_per_round"],
            total_epochs=data["total_epochs"],
            elimination_cadence=data["elimination_cadence"],
            rng_seed=data["rng_seed"],
            cost_ledger=data["cost_ledger"],
            groups=groups,
            history={cid: tuple(acc) for cid, acc in data["history"].items()},
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed state: {exc}") from exc
    _check_state(state)
    return state


def _check_state(state: TournamentState) -> None:
    """Cross-field invariants; a checkpoint violating any of these is corrupt."""
    e = state.epochs_per_round
    if e < 1 or state.total_epochs % e != 0:
        raise ConfigError(
            f"state: total_epochs {state.total_epochs} not a multiple of epochs_per_round {e}"
        )
    if not 0 <= state.rounds_done <= state.total_rounds:
        raise ConfigError(f"state: rounds_done {state.rounds_done} outside 0..{state.total_rounds}")
    seen: set[str] = set()
    for g in state.groups:
        members = list(g.survivors) + [el.candidate_id for el in g.eliminated]
        for cid in members:
            if cid in seen:
                raise ConfigError(f"state: candidate {cid} appears twice")
            seen.add(cid)
        for cid in g.survivors:
            have = len(state.history.get(cid, ()))
            if have != state.rounds_done * e:
                raise ConfigError(
                    f"state: survivor {cid} has {have} epochs after {state.rounds_done} rounds of {e}"
                )
        for el in g.eliminated:
            if not 1 <= el.at_round <= state.rounds_done:
                raise ConfigError(
                    f"state: {el.candidate_id} eliminated at round {el.at_round}, but only {state.rounds_done} rounds are done"
                )
            have = len(state.history.get(el.candidate_id, ()))
            if have != el.at_round * e:
                raise ConfigError(
                    f"state: eliminated {el.candidate_id} has {have} epochs, expected {el.at_round * e}"
                )
    extra = state.history.keys() - seen
    if extra:
        raise ConfigError(f"state: history holds unknown candidate(s) {sorted(extra)}")
    trained = sum(len(acc) for acc in state.history.values())
    if trained != state.cost_ledger:
        raise ConfigError(
            f"state: cost_ledger {state.cost_ledger} disagrees with {trained} trained epochs in history"
        )


def dumps_state(state: TournamentState) -> str:
    """Canonical serialization: sorted keys, fixed layout, trailing newline."""
    return json.dumps(state_to_dict(state), sort_keys=True, indent=2) + "\n"


def save_state(state: TournamentState, path: str) -> None:
    """Atomic write: temp file in the same directory, then rename over the target."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(dumps_state(state))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def load_state(path: str) -> TournamentState:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read state {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"state {path} is not valid JSON: {exc}") from exc
    return state_from_dict(data)


class EvaluatorLike:
    """Structural interface run_round needs; see ncs.evaluators for implementations."""

    def evaluate_batch(self, jobs: Sequence[tuple[Candidate, int, int]]) -> list[list[float]]:
        raise NotImplementedError
