"""Command line entry points.

Exit codes: 0 success, 2 validation problems (bad files, bad references,
bad arguments), 3 runtime failures (search budget, I/O). replay maps its
verdict onto codes directly: Reproduced 0, Diverged 1, record NotFound 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from .errors import (
    MissingScenario,
    RecordNotFound,
    SearchBudgetExceeded,
    ValidationError,
    VoddSimError,
    WindowOutOfRange,
)
from .game_core import DEFAULT_BUDGET
from .knowledge_base import (
    append_entries,
    get_record,
    load_kb,
    match_report,
    replay_record,
)
from .reachability import explore, export_test_cases
from .scenario import load_scenario
from .world_sim import Simulation, write_log

BUDGET_ENV = "VODDSIM_BUDGET"


def _default_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
        if value < 1:
            raise ValueError
        return value
    except ValueError:
        raise ValidationError(
            f"{BUDGET_ENV} must be a positive integer, got {raw!r}"
        ) from None


def _load(path: str):
    try:
        return load_scenario(path)
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path} is not valid JSON: line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from None


def _emit(data: dict, as_json: bool, human: str) -> None:
    if as_json:
        print(json.dumps(data, sort_keys=True, indent=2))
    else:
        print(human)


# ---------------------------------------------------------------------------
# run


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario)
    budget = args.budget if args.budget is not None else _default_budget()
    channel = None
    server = None
    if args.bridge is not None:
        from .bridge import BridgeChannel, BridgeServer

        server = BridgeServer(port=args.bridge)
        print(
            f"bridge listening on ws://{server.host}:{server.port}/authority",
            file=sys.stderr,
        )
        if args.wait_client:
            if not server.wait_for_client(args.wait_client):
                print("no console connected; continuing", file=sys.stderr)
        channel = BridgeChannel(server, poll_timeout=args.poll_timeout)
    sim = Simulation(
        scenario,
        seed=args.seed,
        ticks=args.ticks,
        budget=budget,
        channel=channel,
        verbose=not args.omit_situations,
    )
    try:
        result = sim.run()
    except SearchBudgetExceeded as exc:
        if args.out:
            sim.lines.append(
                {
                    "record": "aborted",
                    "error": "search_budget_exceeded",
                    "needed": exc.needed,
                    "budget": exc.budget,
                    "tick": sim.tick,
                }
            )
            write_log(sim.lines, args.out)
            note = f"; partial log written to {args.out}"
        else:
            note = ""
        print(
            f"error: search budget exceeded at tick {sim.tick} "
            f"(needed {exc.needed}, budget {exc.budget}){note}",
            file=sys.stderr,
        )
        return 3
    finally:
        if server is not None:
            server.close()
    if args.out:
        write_log(result.lines, args.out)
    kb_ids: list[int] = []
    if args.kb:
        kb_ids = append_entries(args.kb, result.kb_entries)
    summary = result.lines[-1]
    payload = {
        "ok": True,
        "scenario": scenario.name,
        "seed": args.seed,
        "ticks_run": result.ticks_run,
        "final_state": result.final_state.as_dict(),
        "conflict_ticks": summary["conflict_ticks"],
        "transfers": summary["transfers"],
        "fallback_engaged": result.fallback_engaged,
        "monitors": result.monitors,
        "log": args.out,
        "kb_ids": kb_ids,
    }
    conflicts = sum(summary["conflict_ticks"].values())
    _emit(
        payload,
        args.json,
        f"{scenario.name}: {result.ticks_run} ticks, "
        f"{conflicts} conflict ticks, "
        f"{summary['transfers']['requests']} transfers "
        f"({summary['transfers']['resolved']} resolved), "
        f"fallback={'yes' if result.fallback_engaged else 'no'}",
    )
    if not args.json:
        for goal, row in result.monitors.items():
            print(
                f"  monitor {goal}: {row['num']}/{row['den']} "
                f"(q={row['q']}) {'pass' if row['pass'] else 'FAIL'}"
            )
    return 0


# ---------------------------------------------------------------------------
# analyze


def _cmd_analyze(args: argparse.Namespace) -> int:
    scenario = _load(args.model)
    budget = args.budget if args.budget is not None else _default_budget()
    findings = explore(scenario, depth=args.depth, budget=budget)
    exported: list[str] = []
    if args.export:
        exported = export_test_cases(scenario, findings, args.export)
    payload = {
        "ok": True,
        "model": scenario.name,
        "findings": [
            {
                "kind": f.conflict.kind,
                "state": f.state.as_dict(),
                "participants": sorted(f.conflict.participants),
                "goals_at_stake": sorted(f.conflict.goals_at_stake),
                "depth": f.depth,
                "prefix": [dict(joint) for joint in f.prefix],
            }
            for f in findings
        ],
        "exported": exported,
    }
    lines = [f"{scenario.name}: {len(findings)} conflict state(s)"]
    for f in findings:
        lines.append(
            f"  depth {f.depth}: {f.conflict.kind} at "
            f"{f.state.as_dict()} involving "
            f"{', '.join(sorted(f.conflict.participants))}"
        )
    if exported:
        lines.append(f"  exported {len(exported)} case file(s) to {args.export}")
    _emit(payload, args.json, "\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# replay


def _cmd_replay(args: argparse.Namespace) -> int:
    records, warnings = load_kb(args.kb)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        record = get_record(records, args.id)
    except RecordNotFound as exc:
        _emit(
            {"ok": False, "status": "NotFound", "error": str(exc)},
            args.json,
            f"NotFound: {exc}",
        )
        return 2
    scenario = _load(args.scenario) if args.scenario else None
    budget = args.budget if args.budget is not None else _default_budget()
    report = replay_record(record, scenario=scenario, budget=budget)
    status = report["status"]
    human = f"{status}: record {args.id} ({record.get('kind')})"
    if status == "Diverged" and "first_differing_tick" in report:
        human += f", first differing tick {report['first_differing_tick']}"
    _emit({"ok": status == "Reproduced", **report}, args.json, human)
    return 0 if status == "Reproduced" else 1


# ---------------------------------------------------------------------------
# report


def _parse_window(raw: str) -> tuple[int, int]:
    try:
        lo, hi = raw.split(":", 1)
        return int(lo), int(hi)
    except ValueError:
        raise ValidationError(
            f"window must look like LO:HI, got {raw!r}"
        ) from None


def _cmd_report(args: argparse.Namespace) -> int:
    records, warnings = load_kb(args.kb)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    scenario = _load(args.scenario)
    window = _parse_window(args.window)
    report = match_report(records, scenario, args.tag, window)
    lines = [f"window {report['window'][0]}..{report['window'][1]}"]
    for row in report["tags"]:
        status = "UNCOVERED" if row["uncovered"] else f"records {row['records']}"
        lines.append(f"  tag {row['tag']!r} -> goals {row['goals']}: {status}")
    if report["unmatched_records"]:
        lines.append(f"  unmatched records: {report['unmatched_records']}")
    _emit({"ok": True, **report}, args.json, "\n".join(lines))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voddsim",
        description="Deterministic multi-agent conflict simulation and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("scenario")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--ticks", type=int, default=10)
    run.add_argument("--budget", type=int, default=None)
    run.add_argument("--out", default=None, help="write the run log here")
    run.add_argument("--kb", default=None, help="append conflict episodes here")
    run.add_argument(
        "--omit-situations",
        action="store_true",
        help="render explanations without situation detail",
    )
    run.add_argument(
        "--bridge",
        type=int,
        nargs="?",
        const=0,
        default=None,
        metavar="PORT",
        help="serve a live authority console (0 picks a free port)",
    )
    run.add_argument("--poll-timeout", type=float, default=0.25)
    run.add_argument(
        "--wait-client",
        type=float,
        default=None,
        metavar="SECONDS",
        help="wait this long for a console before starting",
    )
    run.add_argument("--json", action="store_true")
    run.set_defaults(func=_cmd_run)

    analyze = sub.add_parser("analyze", help="explore a model for conflicts")
    analyze.add_argument("model")
    analyze.add_argument("--depth", type=int, default=None)
    analyze.add_argument("--budget", type=int, default=None)
    analyze.add_argument("--export", default=None, metavar="DIR")
    analyze.add_argument("--json", action="store_true")
    analyze.set_defaults(func=_cmd_analyze)

    replay = sub.add_parser("replay", help="re-run a knowledge base record")
    replay.add_argument("--kb", required=True)
    replay.add_argument("--id", type=int, required=True)
    replay.add_argument("--scenario", default=None)
    replay.add_argument("--budget", type=int, default=None)
    replay.add_argument("--json", action="store_true")
    replay.set_defaults(func=_cmd_replay)

    report = sub.add_parser("report", help="tag coverage over recorded episodes")
    report.add_argument("--kb", required=True)
    report.add_argument("--scenario", required=True)
    report.add_argument(
        "--tag", action="append", required=True, help="repeatable expression"
    )
    report.add_argument("--window", required=True, metavar="LO:HI")
    report.add_argument("--json", action="store_true")
    report.set_defaults(func=_cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, WindowOutOfRange) as exc:
        field = getattr(exc, "field", "")
        where = f" ({field})" if field else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return 2
    except (MissingScenario, RecordNotFound) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SearchBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except VoddSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
