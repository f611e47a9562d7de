from __future__ import annotations

from typing import Sequence

from ncs.arch import STEM, ArchDescriptor, Coeffs, StageSpec
from ncs.evaluators import Evaluator, EvaluatorCapability
from ncs.pool import Candidate


def make_candidate(cid: str, params: int = 1000, macs: int = 1000) -> Candidate:
    desc = ArchDescriptor(cid, 32, 10, Coeffs(), (StageSpec(1, STEM, 3, 0, 2, 8, 1, 0.0),))
    return Candidate(id=cid, w_index=1, d_index=1, r_index=1, arch=desc, params=params, macs=macs)


def make_pool(ids: Sequence[str]) -> dict[str, Candidate]:
    return {cid: make_candidate(cid) for cid in ids}


class ScriptedEvaluator(Evaluator):
    """Serves fixed full-length traces; records the order jobs arrive in."""

    def __init__(self, traces: dict[str, Sequence[float]]):
        self.traces = {cid: list(acc) for cid, acc in traces.items()}
        self.calls: list[str] = []
        self.capability = EvaluatorCapability(kind="scripted", deterministic=True)

    def evaluate(self, candidate: Candidate, from_epoch: int, n_epochs: int) -> list[float]:
        self.calls.append(candidate.id)
        return self.traces[candidate.id][from_epoch : from_epoch + n_epochs]
