"""Rendering and provenance: every emitted document names the engine version
and a hash of the configuration that produced it.

JSON is the canonical format; CSV and markdown renderings carry the same
provenance as comment lines / a footer.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from typing import Any, Mapping, Sequence

from . import __version__
from .cost import CostReport
from .pool import Candidate, Group, PoolStats, stats_to_dict
from .scaling import ScalingLadder, ladder_rows
from .tournament import TournamentState, avg_accuracy, champions

HASH_LEN = 12

# Reference coefficient table for the standard nine-stage baseline at side 224
# (the values the four-rung ladder is expected to land on, for delta display).
REFERENCE_LADDER = (
    {"index": 1, "d": 1.0, "t": 18, "w": 1.0, "r": 1.0, "resolution": 224},
    {"index": 2, "d": 0.7, "t": 17, "w": 0.8666, "r": 0.905, "resolution": 203},
    {"index": 3, "d": 0.6, "t": 15, "w": 0.701, "r": 0.766, "resolution": 172},
    {"index": 4, "d": 0.5, "t": 12, "w": 0.514, "r": 0.587, "resolution": 132},
)


def config_hash(config: Any) -> str:
    """Short stable hash of any JSON-serializable configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:HASH_LEN]


def provenance(config: Any) -> dict[str, str]:
    return {"engine_version": __version__, "config_hash": config_hash(config)}


def _csv_head(prov: Mapping[str, str]) -> list[str]:
    return [f"# {key}={value}" for key, value in sorted(prov.items())]


def _md_foot(prov: Mapping[str, str]) -> str:
    pairs = ", ".join(f"{key}={value}" for key, value in sorted(prov.items()))
    return f"\n_{pairs}_\n"


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], prov: Mapping[str, str]) -> str:
    buf = io.StringIO()
    for line in _csv_head(prov):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_md_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [
        "| " + " | ".join(str(h) for h in header) + " |",
        "|" + "|".join(" --- " for _ in header) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(str(v) for v in row) + " |")
    return "\n".join(lines) + "\n"


# --- ladder ------------------------------------------------------------------


def _ladder_reference_rows(ladder: ScalingLadder) -> list[dict] | None:
    """Reference values apply only to the canonical 4-rung / side-224 ladder."""
    if ladder.base_resolution != 224 or ladder.size != len(REFERENCE_LADDER):
        return None
    return list(REFERENCE_LADDER)


def ladder_doc(ladder: ScalingLadder) -> dict[str, Any]:
    doc = {
        "max_index": ladder.max_index,
        "base_resolution": ladder.base_resolution,
        "truncated": ladder.truncated,
        "rungs": ladder_rows(ladder),
    }
    ref = _ladder_reference_rows(ladder)
    if ref is not None:
        doc["reference"] = [
            {
                "index": r["index"],
                "delta_w": round(row["w"] - r["w"], 4),
                "delta_r": round(row["r"] - r["r"], 4),
                "delta_t": row["t"] - r["t"],
                "delta_resolution": row["resolution"] - r["resolution"],
            }
            for row, r in zip(ladder_rows(ladder), ref)
        ]
    return doc


def ladder_table_rows(ladder: ScalingLadder) -> tuple[list[str], list[list[Any]]]:
    ref = _ladder_reference_rows(ladder)
    header = ["index", "d", "t", "w", "r", "resolution"]
    rows = []
    for row in ladder_rows(ladder):
        rows.append(
            [row["index"], f"{row['d']:.4f}", row["t"], f"{row['w']:.4f}", f"{row['r']:.4f}", row["resolution"]]
        )
    if ref is not None:
        header += ["ref_w", "delta_w", "ref_r", "delta_r"]
        for row, r, out in zip(ladder_rows(ladder), ref, rows):
            out += [
                f"{r['w']:.4f}",
                f"{row['w'] - r['w']:+.4f}",
                f"{r['r']:.4f}",
                f"{row['r'] - r['r']:+.4f}",
            ]
    return header, rows


def ladder_markdown(ladder: ScalingLadder, prov: Mapping[str, str]) -> str:
    header, rows = ladder_table_rows(ladder)
    title = "# Scaling ladder\n\n"
    note = ""
    if ladder.truncated:
        note = f"\nNote: ladder truncated at {ladder.size} of {ladder.max_index} requested rungs.\n"
    return title + render_md_table(header, rows) + note + _md_foot(prov)


def ladder_csv(ladder: ScalingLadder, prov: Mapping[str, str]) -> str:
    header, rows = ladder_table_rows(ladder)
    return render_csv(header, rows, prov)


# --- cost ----------------------------------------------------------------------


def cost_markdown(report: CostReport, prov: Mapping[str, str], per_stage: bool = False) -> str:
    lines = [f"# Cost: {report.name}\n"]
    lines.append(f"- params: {report.params:,}")
    lines.append(f"- MACs: {report.macs:,}")
    lines.append(f"- convention: {report.convention_note}\n")
    out = "\n".join(lines)
    if per_stage:
        out += render_md_table(
            ["stage", "kind", "params", "MACs", "out side"],
            [
                [s.stage_index, s.operator_kind, s.params, s.macs, s.output_resolution]
                for s in report.stages
            ],
        )
    return out + _md_foot(prov)


def cost_csv(report: CostReport, prov: Mapping[str, str]) -> str:
    rows: list[list[Any]] = [
        [s.stage_index, s.operator_kind, s.params, s.macs, s.output_resolution]
        for s in report.stages
    ]
    rows.append(["total", report.name, report.params, report.macs, ""])
    return render_csv(["stage", "kind", "params", "macs", "output_resolution"], rows, prov)


# --- pool ----------------------------------------------------------------------


def _z(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def pool_csv(pool: Sequence[Candidate], prov: Mapping[str, str]) -> str:
    rows = [
        [c.id, c.w_index, c.d_index, c.r_index, c.arch.input_resolution, c.params, c.macs, _z(c.z_params), _z(c.z_macs), _z(c.z_sum)]
        for c in pool
    ]
    return render_csv(
        ["id", "w_index", "d_index", "r_index", "resolution", "params", "macs", "z_params", "z_macs", "z_sum"],
        rows,
        prov,
    )


def pool_markdown(pool: Sequence[Candidate], stats: PoolStats | None, prov: Mapping[str, str]) -> str:
    out = f"# Candidate pool ({len(pool)} candidates)\n\n"
    if stats:
        s = stats_to_dict(stats)
        out += render_md_table(
            ["axis", "mean", "population sd"],
            [
                ["params", f"{s['params_mean']:,.1f}", f"{s['params_sd']:,.1f}"],
                ["MACs", f"{s['macs_mean']:,.1f}", f"{s['macs_sd']:,.1f}"],
            ],
        )
        out += "\n"
    out += render_md_table(
        ["id", "resolution", "params", "MACs", "z_sum"],
        [[c.id, c.arch.input_resolution, c.params, c.macs, _z(c.z_sum)] for c in pool],
    )
    return out + _md_foot(prov)


def groups_csv(groups: Sequence[Group], pool_by_id: Mapping[str, Candidate], prov: Mapping[str, str]) -> str:
    rows = []
    for g in groups:
        for cid in g.member_ids:
            c = pool_by_id.get(cid)
            rows.append([g.group_id, cid, _z(c.z_sum) if c else "", c.params if c else "", c.macs if c else ""])
    return render_csv(["group_id", "candidate_id", "z_sum", "params", "macs"], rows, prov)


def groups_markdown(groups: Sequence[Group], prov: Mapping[str, str]) -> str:
    out = f"# Groups ({len(groups)})\n\n"
    out += render_md_table(
        ["group_id", "size", "members"],
        [[g.group_id, len(g.member_ids), ", ".join(g.member_ids)] for g in groups],
    )
    return out + _md_foot(prov)


# --- tournament state -----------------------------------------------------------


def state_summary(state: TournamentState) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "rounds_done": state.rounds_done,
        "total_rounds": state.total_rounds,
        "epochs_per_round": state.epochs_per_round,
        "total_epochs": state.total_epochs,
        "complete": state.complete,
        "cost_ledger_epochs": state.cost_ledger,
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
    }
    if state.complete:
        champs = champions(state)
        doc["champions"] = [
            {
                "group_id": gid,
                "candidate_id": cid,
                "final_accuracy": state.history[cid][-1],
                "avg_accuracy": avg_accuracy(state.history[cid], len(state.history[cid])),
            }
            for gid, cid in sorted(champs.items())
        ]
    return doc


def state_markdown(state: TournamentState, prov: Mapping[str, str]) -> str:
    doc = state_summary(state)
    out = "# Tournament summary\n\n"
    out += f"- rounds: {doc['rounds_done']} of {doc['total_rounds']} ({doc['epochs_per_round']} epochs each)\n"
    out += f"- training cost so far: {doc['cost_ledger_epochs']} candidate-epochs\n"
    out += f"- complete: {doc['complete']}\n\n"
    if "champions" in doc:
        out += "## Champions\n\n"
        out += render_md_table(
            ["group", "candidate", "final acc", "avg acc"],
            [
                [c["group_id"], c["candidate_id"], f"{c['final_accuracy']:.2f}", f"{c['avg_accuracy']:.2f}"]
                for c in doc["champions"]
            ],
        )
        out += "\n"
    out += "## Elimination timeline\n\n"
    rows = []
    for g in doc["groups"]:
        for e in g["eliminated"]:
            rows.append([g["group_id"], e["candidate_id"], e["at_round"]])
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    out += render_md_table(["group", "candidate", "eliminated at round"], rows) if rows else "(none)\n"
    return out + _md_foot(prov)


def eliminations_csv(state: TournamentState, prov: Mapping[str, str]) -> str:
    rows = []
    for g in state.groups:
        for e in g.eliminated:
            rows.append([g.group_id, e.candidate_id, e.at_round, e.at_round * state.epochs_per_round])
    rows.sort(key=lambda r: (r[2], r[0], r[1]))
    return render_csv(["group_id", "candidate_id", "at_round", "at_epoch"], rows, prov)


def accuracy_csv(state: TournamentState, pool_by_id: Mapping[str, Candidate], prov: Mapping[str, str]) -> str:
    """Final/average accuracy and cost per candidate that trained at all."""
    rows = []
    for cid in sorted(state.history):
        acc = state.history[cid]
        c = pool_by_id.get(cid)
        rows.append(
            [
                cid,
                len(acc),
                f"{acc[-1]:.4f}",
                f"{avg_accuracy(acc, len(acc)):.4f}",
                c.params if c else "",
                c.macs if c else "",
            ]
        )
    return render_csv(
        ["candidate_id", "epochs_trained", "final_accuracy", "avg_accuracy", "params", "macs"], rows, prov
    )


def champions_csv(state: TournamentState, pool_by_id: Mapping[str, Candidate], prov: Mapping[str, str]) -> str:
    champs = champions(state)
    rows = []
    for gid, cid in sorted(champs.items()):
        acc = state.history[cid]
        c = pool_by_id.get(cid)
        rows.append(
            [gid, cid, f"{acc[-1]:.4f}", f"{avg_accuracy(acc, len(acc)):.4f}", c.params if c else "", c.macs if c else ""]
        )
    return render_csv(
        ["group_id", "candidate_id", "final_accuracy", "avg_accuracy", "params", "macs"], rows, prov
    )


# --- model card ------------------------------------------------------------------


def model_card_doc(name: str, coeff_info: dict[str, Any], report: CostReport, arch_doc: dict[str, Any]) -> dict[str, Any]:
    return {
        "name": name,
        "coefficients": coeff_info,
        "params": report.params,
        "macs": report.macs,
        "convention_note": report.convention_note,
        "arch": arch_doc,
    }


def model_card_markdown(card: dict[str, Any], prov: Mapping[str, str]) -> str:
    out = f"# {card['name']}\n\n"
    coeffs = card["coefficients"]
    out += render_md_table(list(coeffs.keys()), [list(coeffs.values())])
    out += "\n"
    out += f"- params: {card['params']:,}\n"
    out += f"- MACs: {card['macs']:,}\n"
    out += f"- input side: {card['arch']['input_resolution']}\n"
    out += f"- convention: {card['convention_note']}\n\n"
    out += render_md_table(
        ["stage", "kind", "kernel", "expansion", "stride", "channels", "repeats"],
        [
            [s["index"], s["operator_kind"], s["kernel"], s["expansion"], s["stride"], s["out_channels"], s["repeats"]]
            for s in card["arch"]["stages"]
        ],
    )
    return out + _md_foot(prov)


def rank_metrics_markdown(doc: dict[str, Any], prov: Mapping[str, str]) -> str:
    out = "# Ranking consistency\n\n"
    out += f"- rounds: {doc['rounds']} x {doc['epochs_per_round']} epochs\n"
    out += f"- final ranking (best first): {', '.join(doc['final_ranking'])}\n\n"
    out += render_md_table(
        ["criterion", "matches", "value"],
        [
            ["specific", doc["p_specific"]["fraction"], f"{doc['p_specific']['value']:.4f}"],
            ["average", doc["p_average"]["fraction"], f"{doc['p_average']['value']:.4f}"],
        ],
    )
    return out + _md_foot(prov)
