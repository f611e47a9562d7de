"""Report figures, rendered headless straight to files."""

from __future__ import annotations

import os
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .pool import Candidate
from .tournament import TournamentState


def _final_accuracies(state: TournamentState) -> dict[str, float]:
    return {cid: acc[-1] for cid, acc in state.history.items() if acc}

def _survivor_set(state: TournamentState) -> set[str]:
    return {cid for g in state.groups for cid in g.survivors}


def scatter_cost_accuracy(
    state: TournamentState,
    pool_by_id: Mapping[str, Candidate],
    axis: str,
    out_path: str,
) -> str:
    """Cost-vs-final-accuracy scatter; survivors and eliminated get their own markers."""
    if axis not in ("params", "macs"):
        raise ValueError(f"axis must be params or macs, got {axis!r}")
    finals = _final_accuracies(state)
    survivors = _survivor_set(state)
    scale = 1e6
    xs_s, ys_s, xs_e, ys_e = [], [], [], []
    for cid, acc in finals.items():
        c = pool_by_id.get(cid)
        if c is None:
            continue
        x = (c.params if axis == "params" else c.macs) / scale
        if cid in survivors:
            xs_s.append(x)
            ys_s.append(acc)
        else:
            xs_e.append(x)
            ys_e.append(acc)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if xs_e:
        ax.scatter(xs_e, ys_e, marker="x", c="tab:gray", label="eliminated")
    if xs_s:
        ax.scatter(xs_s, ys_s, marker="o", c="tab:blue", label="survivors")
    ax.set_xlabel("params (M)" if axis == "params" else "MACs (M)")
    ax.set_ylabel("final accuracy (%)")
    ax.set_title(f"{axis} vs final accuracy")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def accuracy_curves(state: TournamentState, out_path: str, max_curves: int = 24) -> str:
    """Per-candidate accuracy curves with elimination epochs marked."""
    elim_round = {
        e.candidate_id: e.at_round for g in state.groups for e in g.eliminated
    }
    fig, ax = plt.subplots(figsize=(7, 4.5))
    shown = 0
    for cid in sorted(state.history):
        if shown >= max_curves:
            break
        acc = state.history[cid]
        if not acc:
            continue
        epochs = range(1, len(acc) + 1)
        (line,) = ax.plot(epochs, acc, linewidth=1.0, alpha=0.8, label=cid)
        if cid in elim_round:
            x = elim_round[cid] * state.epochs_per_round
            ax.plot([x], [acc[x - 1]], marker="x", color=line.get_color(), markersize=8)
        shown += 1
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy (%)")
    ax.set_title("training curves (x = eliminated)")
    ax.grid(True, alpha=0.3)
    if shown <= 12:
        ax.legend(loc="lower right", fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_report_figures(
    state: TournamentState, pool_by_id: Mapping[str, Candidate], out_dir: str
) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    written = [
        scatter_cost_accuracy(state, pool_by_id, "params", os.path.join(out_dir, "params_vs_accuracy.png")),
        scatter_cost_accuracy(state, pool_by_id, "macs", os.path.join(out_dir, "macs_vs_accuracy.png")),
        accuracy_curves(state, os.path.join(out_dir, "training_curves.png")),
    ]
    return written
