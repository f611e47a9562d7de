"""Command line interface.

Subcommands: derive-coeffs, build, cost, pool, group, search, rank-metrics,
model-card, report. Shared flags: --config, --seed, --out, --format.

Exit codes: 0 success, 2 validation/config error, 3 evaluator/protocol error,
4 internal invariant violation. NCS_LOG_LEVEL (error|warn|info|debug) controls
stderr logging.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import traceback
from fractions import Fraction
from typing import Any

from . import __version__, arch, evaluators, pool as pool_mod, reporting, scaling, tournament
from .errors import EXIT_INTERNAL, ConfigError, DomainError, NcsError

log = logging.getLogger("ncs")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    raw = os.environ.get("NCS_LOG_LEVEL", "warn")
    if raw not in LOG_LEVELS:
        raise ConfigError(f"NCS_LOG_LEVEL must be one of {sorted(LOG_LEVELS)}, got {raw!r}")
    logging.basicConfig(level=LOG_LEVELS[raw], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _coeff(text: str) -> Fraction:
    """Coefficients parse exactly: '0.7', '7/10' and '1' are all the same rung."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _emit(args: argparse.Namespace, json_doc, md_text, csv_text) -> None:
    """Render per --format; callables defer work until the format is chosen."""
    fmt = args.format
    if fmt == "json":
        _write_or_print(json.dumps(json_doc() if callable(json_doc) else json_doc, indent=2, sort_keys=True), args.out)
    elif fmt == "md":
        _write_or_print(md_text() if callable(md_text) else md_text, args.out)
    else:
        _write_or_print(csv_text() if callable(csv_text) else csv_text, args.out)


def _seed(args: argparse.Namespace, config: dict[str, Any] | None = None) -> int:
    if args.seed is not None:
        return args.seed
    if config and "seed" in config:
        return config["seed"]
    return 1


def _load_json(path: str, what: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path} is not valid JSON: {exc}") from exc


# --- subcommands -------------------------------------------------------------


def cmd_derive_coeffs(args: argparse.Namespace) -> int:
    ladder = scaling.derive_ladder(args.max_index, args.base_resolution)
    prov = reporting.provenance(
        {"command": "derive-coeffs", "max_index": args.max_index, "base_resolution": args.base_resolution}
    )
    if ladder.truncated:
        log.warning("ladder truncated at %d of %d rungs", ladder.size, ladder.max_index)
    _emit(
        args,
        lambda: {**prov, **reporting.ladder_doc(ladder)},
        lambda: reporting.ladder_markdown(ladder, prov),
        lambda: reporting.ladder_csv(ladder, prov),
    )
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    model = arch.build_model(args.w, args.d, args.r, divisor=args.divisor, name=args.name)
    if args.hf is not None:
        model = arch.hf_transform(model, args.hf)
    text = json.dumps(arch.to_dict(model), indent=2, sort_keys=True)
    _write_or_print(text, args.out)
    return 0


def cmd_cost(args: argparse.Namespace) -> int:
    from . import cost as cost_mod

    model = arch.load_descriptor(args.arch)
    report = cost_mod.cost(model)
    prov = reporting.provenance({"command": "cost", "arch": arch.to_dict(model)})
    _emit(
        args,
        lambda: {**prov, **cost_mod.report_to_dict(report, per_stage=args.per_stage)},
        lambda: reporting.cost_markdown(report, prov, per_stage=args.per_stage),
        lambda: reporting.cost_csv(report, prov),
    )
    return 0


def cmd_pool(args: argparse.Namespace) -> int:
    ladder = scaling.derive_ladder(args.max_index, args.base_resolution)
    candidates = pool_mod.generate_pool(
        ladder, divisor=args.divisor, hf=args.hf, hf_resolutions=args.hf_resolutions
    )
    standardized, stats = pool_mod.standardize(candidates)
    prov = reporting.provenance(
        {
            "command": "pool",
            "max_index": args.max_index,
            "base_resolution": args.base_resolution,
            "divisor": args.divisor,
            "hf": args.hf,
            "hf_resolutions": list(args.hf_resolutions),
        }
    )
    extra = {**prov, "ladder": scaling.ladder_to_dict(ladder), "divisor": args.divisor}
    if args.out and args.format == "json":
        pool_mod.save_pool(args.out, standardized, stats, extra)
        log.info("wrote %d candidates to %s", len(standardized), args.out)
        return 0
    _emit(
        args,
        lambda: {
            **extra,
            "stats": pool_mod.stats_to_dict(stats),
            "candidates": [pool_mod.candidate_to_dict(c) for c in standardized],
        },
        lambda: reporting.pool_markdown(standardized, stats, prov),
        lambda: reporting.pool_csv(standardized, prov),
    )
    return 0


def cmd_group(args: argparse.Namespace) -> int:
    candidates = pool_mod.load_pool(args.pool)
    groups = pool_mod.group(candidates, args.groups)
    prov = reporting.provenance({"command": "group", "pool": args.pool, "groups": args.groups})
    by_id = {c.id: c for c in candidates}
    if args.out and args.format == "json":
        pool_mod.save_groups(args.out, groups, prov)
        log.info("wrote %d groups to %s", len(groups), args.out)
        return 0
    _emit(
        args,
        lambda: {
            **prov,
            "n_groups": len(groups),
            "groups": [{"group_id": g.group_id, "member_ids": list(g.member_ids)} for g in groups],
        },
        lambda: reporting.groups_markdown(groups, prov),
        lambda: reporting.groups_csv(groups, by_id, prov),
    )
    return 0


_RUN_CONFIG_KEYS = {
    "epochs_per_round",
    "total_epochs",
    "elimination_cadence",
    "pool_file",
    "groups_file",
    "state_file",
    "seed",
    "evaluator",
}


def cmd_search(args: argparse.Namespace) -> int:
    if not args.config:
        raise ConfigError("search needs --config pointing at a run config")
    config = _load_json(args.config, "run config")
    if not isinstance(config, dict):
        raise ConfigError(f"run config {args.config} must be a JSON object")
    unknown = config.keys() - _RUN_CONFIG_KEYS
    if unknown:
        raise ConfigError(f"run config has unknown field(s) {sorted(unknown)}")
    for key in ("pool_file", "groups_file"):
        if key not in config:
            raise ConfigError(f"run config missing {key!r}")
    base_dir = os.path.dirname(os.path.abspath(args.config))

    def _rel(path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(base_dir, path)

    candidates = pool_mod.load_pool(_rel(config["pool_file"]))
    groups = pool_mod.load_groups(_rel(config["groups_file"]))
    by_id = {c.id: c for c in candidates}
    seed = _seed(args, config)

    if args.resume:
        state = tournament.load_state(args.resume)
        for key, have in (
            ("epochs_per_round", state.epochs_per_round),
            ("total_epochs", state.total_epochs),
            ("elimination_cadence", state.elimination_cadence),
        ):
            if key in config and config[key] != have:
                raise ConfigError(f"resume state has {key}={have}, run config says {config[key]}")
    else:
        state = tournament.initial_state(
            groups,
            epochs_per_round=config.get("epochs_per_round", tournament.DEFAULT_EPOCHS_PER_ROUND),
            total_epochs=config.get("total_epochs", tournament.DEFAULT_TOTAL_EPOCHS),
            elimination_cadence=config.get("elimination_cadence", 1),
            rng_seed=seed,
        )

    ev_config = config.get("evaluator", {})
    if args.evaluator:
        ev_config = {**ev_config, "kind": args.evaluator}
    if not ev_config:
        raise ConfigError("no evaluator configured: set evaluator.kind in the config or pass --evaluator")
    if ev_config.get("kind") == "trace" and "traces_dir" in ev_config:
        ev_config = {**ev_config, "traces_dir": _rel(ev_config["traces_dir"])}

    out_path = args.out or (_rel(config["state_file"]) if "state_file" in config else "state.json")
    prov = reporting.provenance({"command": "search", "config": config, "seed": seed})

    evaluator = evaluators.make_evaluator(ev_config, seed)
    try:
        state = tournament.run_search(
            state, evaluator, by_id, checkpoint_path=out_path, max_rounds=args.max_rounds
        )
    finally:
        evaluator.close()
    tournament.save_state(state, out_path)
    log.info("state after %d rounds written to %s", state.rounds_done, out_path)

    summary = reporting.state_summary(state)
    fmt = args.format
    if fmt == "md":
        print(reporting.state_markdown(state, prov), end="")
    elif fmt == "csv":
        print(reporting.accuracy_csv(state, by_id, prov), end="")
    else:
        print(json.dumps({**prov, **summary, "state_file": out_path}, indent=2, sort_keys=True))
    return 0


def cmd_rank_metrics(args: argparse.Namespace) -> int:
    traces = evaluators.load_all_traces(args.traces)
    doc = tournament.rank_metrics(traces, args.round_epochs)
    prov = reporting.provenance(
        {"command": "rank-metrics", "traces": sorted(traces), "round_epochs": args.round_epochs}
    )
    _emit(
        args,
        lambda: {**prov, **doc},
        lambda: reporting.rank_metrics_markdown(doc, prov),
        lambda: reporting.render_csv(
            ["criterion", "matches", "value"],
            [
                ["specific", doc["p_specific"]["fraction"], doc["p_specific"]["value"]],
                ["average", doc["p_average"]["fraction"], doc["p_average"]["value"]],
            ],
            prov,
        ),
    )
    return 0


def cmd_model_card(args: argparse.Namespace) -> int:
    ladder = scaling.derive_ladder(args.max_index, args.base_resolution)
    for label, idx in (("w", args.w_index), ("d", args.d_index), ("r", args.r_index)):
        if not 1 <= idx <= ladder.size:
            raise DomainError(f"{label}-index {idx} outside ladder of size {ladder.size}")
    i, j, k = args.w_index, args.d_index, args.r_index
    if args.hf is not None:
        name = f"Model(w{i},d{j})-hf{args.hf}"
        model = arch.build_model(
            ladder.width_coeffs[i - 1], ladder.depth_coeffs[j - 1], 1, divisor=args.divisor, name=f"Model(w{i},d{j})"
        )
        model = arch.hf_transform(model, args.hf)
        coeff_info: dict[str, Any] = {
            "w_index": i,
            "d_index": j,
            "w": round(float(ladder.width_coeffs[i - 1]), 4),
            "d": round(float(ladder.depth_coeffs[j - 1]), 4),
            "hf_resolution": args.hf,
        }
    else:
        name = f"Model(w{i},d{j},r{k})"
        model = arch.build_model(
            ladder.width_coeffs[i - 1],
            ladder.depth_coeffs[j - 1],
            ladder.resolution_coeffs[k - 1],
            divisor=args.divisor,
            name=name,
        )
        coeff_info = {
            "w_index": i,
            "d_index": j,
            "r_index": k,
            "w": round(float(ladder.width_coeffs[i - 1]), 4),
            "d": round(float(ladder.depth_coeffs[j - 1]), 4),
            "r": round(float(ladder.resolution_coeffs[k - 1]), 4),
        }
    from . import cost as cost_mod

    report = cost_mod.cost(model)
    card = reporting.model_card_doc(name, coeff_info, report, arch.to_dict(model))
    prov = reporting.provenance({"command": "model-card", "coefficients": coeff_info, "divisor": args.divisor})
    _emit(
        args,
        lambda: {**prov, **card},
        lambda: reporting.model_card_markdown(card, prov),
        lambda: reporting.render_csv(
            ["name", "params", "macs", "input_resolution"],
            [[card["name"], card["params"], card["macs"], card["arch"]["input_resolution"]]],
            prov,
        ),
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    state = tournament.load_state(args.state)
    candidates = pool_mod.load_pool(args.pool)
    by_id = {c.id: c for c in candidates}
    prov = reporting.provenance({"command": "report", "state": args.state, "pool": args.pool})
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    def _write(name: str, text: str) -> None:
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        written.append(path)

    _write("summary.md", reporting.state_markdown(state, prov))
    _write("accuracy.csv", reporting.accuracy_csv(state, by_id, prov))
    _write("eliminations.csv", reporting.eliminations_csv(state, prov))
    if state.complete:
        _write("champions.csv", reporting.champions_csv(state, by_id, prov))
    if not args.no_figures:
        from . import figures

        written.extend(figures.render_report_figures(state, by_id, out_dir))
    manifest = {**prov, "complete": state.complete, "out_dir": out_dir, "written": sorted(written)}
    if args.format == "md":
        _write_or_print(reporting.state_markdown(state, prov), args.out)
    elif args.format == "csv":
        _write_or_print(reporting.accuracy_csv(state, by_id, prov), args.out)
    else:
        _write_or_print(json.dumps(manifest, indent=2, sort_keys=True), args.out)
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON (used by search)")
    common.add_argument("--seed", type=int, default=None, help="deterministic seed (default 1)")
    common.add_argument("--out", help="write the primary output to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "md"), default="json", help="output format")

    parser = argparse.ArgumentParser(prog="ncs", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ncs {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("derive-coeffs", parents=[common], help="derive the scaling-down coefficient ladder")
    p.add_argument("--max-index", type=int, default=scaling.DEFAULT_MAX_INDEX)
    p.add_argument("--base-resolution", type=int, default=scaling.DEFAULT_BASE_RESOLUTION)
    p.set_defaults(func=cmd_derive_coeffs)

    p = sub.add_parser("build", parents=[common], help="realize a descriptor from explicit coefficients")
    p.add_argument("--w", type=_coeff, required=True)
    p.add_argument("--d", type=_coeff, required=True)
    p.add_argument("--r", type=_coeff, required=True)
    p.add_argument("--divisor", type=int, default=arch.DEFAULT_DIVISOR)
    p.add_argument("--hf", type=int, default=None, help="also apply the hardware-friendly transform at this input side")
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("cost", parents=[common], help="analytic params/MACs for a descriptor")
    p.add_argument("--arch", required=True, help="descriptor JSON file")
    p.add_argument("--per-stage", action="store_true")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("pool", parents=[common], help="enumerate and standardize the candidate pool")
    p.add_argument("--max-index", type=int, default=scaling.DEFAULT_MAX_INDEX)
    p.add_argument("--base-resolution", type=int, default=scaling.DEFAULT_BASE_RESOLUTION)
    p.add_argument("--divisor", type=int, default=arch.DEFAULT_DIVISOR)
    p.add_argument("--hf", action="store_true", help="hardware-friendly pool instead of the standard one")
    p.add_argument("--hf-resolutions", type=_int_list, default=arch.HF_RESOLUTIONS)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("group", parents=[common], help="split a standardized pool into resource groups")
    p.add_argument("--pool", required=True)
    p.add_argument("--groups", type=int, default=10)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("search", parents=[common], help="run the elimination tournament")
    p.add_argument("--evaluator", choices=("trace", "synthetic", "external"), default=None)
    p.add_argument("--resume", help="resume from this checkpoint")
    p.add_argument("--max-rounds", type=int, default=None, help="stop after this many additional rounds")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("rank-metrics", parents=[common], help="ranking consistency across round boundaries")
    p.add_argument("--traces", required=True, help="directory of per-candidate trace JSON files")
    p.add_argument("--round-epochs", type=int, default=tournament.DEFAULT_EPOCHS_PER_ROUND)
    p.set_defaults(func=cmd_rank_metrics)

    p = sub.add_parser("model-card", parents=[common], help="descriptor + cost card for one ladder point")
    p.add_argument("--w-index", type=int, required=True)
    p.add_argument("--d-index", type=int, required=True)
    p.add_argument("--r-index", type=int, default=1)
    p.add_argument("--max-index", type=int, default=scaling.DEFAULT_MAX_INDEX)
    p.add_argument("--base-resolution", type=int, default=scaling.DEFAULT_BASE_RESOLUTION)
    p.add_argument("--divisor", type=int, default=arch.DEFAULT_DIVISOR)
    p.add_argument("--hf", type=int, default=None, help="hardware-friendly variant at this input side (r-index ignored)")
    p.set_defaults(func=cmd_model_card)

    p = sub.add_parser("report", parents=[common], help="render CSV/markdown/figure report from a state file")
    p.add_argument("--state", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out-dir", default="report")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        parser = build_parser()
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            parser.print_help(sys.stderr)
            return 2
        return args.func(args)
    except NcsError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:  # pragma: no cover - unexpected bugs land on exit code 4
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
