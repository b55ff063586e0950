"""Append-only store of conflict episodes, with replay and coverage reports.

The store is JSONL. Record ids are integers and strictly increase down the
file; appending never rewrites existing lines. A run that died mid-write
leaves a truncated final line, which loading skips with a warning; a
mangled line anywhere else means real corruption and is an error.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Sequence

from .errors import (
    MissingScenario,
    RecordNotFound,
    ValidationError,
    WindowOutOfRange,
)
from .expr import expression_features, parse_expression
from .scenario import Scenario, load_scenario
from .world_sim import run_simulation

FORMAT_VERSION = 1

REQUIRED_FIELDS = (
    "kind",
    "participants",
    "goals_at_stake",
    "tick",
    "outcome",
    "seed",
    "ticks",
)


def load_kb(path: str) -> tuple[list[dict], list[str]]:
    """All records plus any warnings. A missing file is an empty store."""
    if not os.path.exists(path):
        return [], []
    records: list[dict] = []
    warnings: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    for index, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError:
            if index == len(lines) - 1:
                warnings.append(
                    f"skipped truncated final line {index + 1} "
                    "(interrupted write)"
                )
                continue
            raise ValidationError(
                f"corrupt record on line {index + 1}", path
            ) from None
        records.append(record)
    last = None
    for record in records:
        rid = record.get("id")
        if not isinstance(rid, int):
            raise ValidationError(f"record without integer id: {record!r}", path)
        if last is not None and rid <= last:
            raise ValidationError(
                f"record ids must strictly increase ({rid} after {last})", path
            )
        last = rid
    return records, warnings


def append_entries(path: str, entries: Sequence[dict]) -> list[int]:
    """Assign ids after the current maximum and append. Never rewrites."""
    records, _ = load_kb(path)
    next_id = (records[-1]["id"] + 1) if records else 1
    assigned = []
    with open(path, "a", encoding="utf-8") as fh:
        for entry in entries:
            for fname in REQUIRED_FIELDS:
                if fname not in entry:
                    raise ValidationError(
                        f"knowledge base entry missing {fname!r}"
                    )
            claimed = entry.get("id")
            if claimed is not None and (
                not isinstance(claimed, int) or claimed < next_id
            ):
                raise ValidationError(
                    f"entry id {claimed!r} does not extend the store "
                    f"(next free id is {next_id})"
                )
            record = dict(entry)
            record["id"] = claimed if claimed is not None else next_id
            record["format_version"] = FORMAT_VERSION
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
            assigned.append(record["id"])
            next_id = record["id"] + 1
    return assigned


def get_record(records: Sequence[dict], record_id: int) -> dict:
    for record in records:
        if record.get("id") == record_id:
            return record
    raise RecordNotFound(f"no knowledge base record with id {record_id}")


# ---------------------------------------------------------------------------
# Replay


def replay_record(
    record: dict,
    scenario: Optional[Scenario] = None,
    budget: Optional[int] = None,
) -> dict:
    """Re-run the recorded episode and compare against what was stored.

    Reproduced means a conflict with the recorded kind and participants was
    detected at the recorded tick and every per-tick digest matches.
    Anything else is Diverged, with the first differing tick when the
    digests disagree.
    """
    if scenario is None:
        path = record.get("scenario_path")
        if not path or not os.path.exists(path):
            raise MissingScenario(
                f"record {record.get('id')} points at missing scenario "
                f"{path!r}; pass the scenario explicitly"
            )
        scenario = load_scenario(path)
    kwargs = {}
    if budget is not None:
        kwargs["budget"] = budget
    result = run_simulation(
        scenario, seed=record["seed"], ticks=record["ticks"], **kwargs
    )
    report: dict = {
        "record_id": record.get("id"),
        "scenario": scenario.name,
        "scenario_changed": (
            record.get("scenario_digest") is not None
            and scenario.digest is not None
            and record["scenario_digest"] != scenario.digest
        ),
    }
    wanted_kind = record["kind"]
    wanted_participants = sorted(record["participants"])
    wanted_tick = record["tick"]
    matched = any(
        c.kind == wanted_kind
        and sorted(c.participants) == wanted_participants
        and c.detected_at == wanted_tick
        for c in result.conflicts
    )
    report["conflict_matched"] = matched
    stored = record.get("trace_digests") or []
    fresh = result.tick_digests
    first_diff = None
    for i in range(max(len(stored), len(fresh))):
        if i >= len(stored) or i >= len(fresh):
            first_diff = min(
                stored[i]["tick"] if i < len(stored) else fresh[i]["tick"],
                fresh[i]["tick"] if i < len(fresh) else stored[i]["tick"],
            )
            break
        if stored[i]["sha256"] != fresh[i]["sha256"]:
            first_diff = stored[i]["tick"]
            break
    digests_match = first_diff is None and bool(stored)
    if not stored:
        # nothing to compare against; fall back to the conflict check alone
        digests_match = True
        report["digests_compared"] = False
    else:
        report["digests_compared"] = True
    if matched and digests_match:
        report["status"] = "Reproduced"
    else:
        report["status"] = "Diverged"
        if first_diff is not None:
            report["first_differing_tick"] = first_diff
    return report


# ---------------------------------------------------------------------------
# Tag coverage


def match_report(
    records: Sequence[dict],
    scenario: Scenario,
    tags: Sequence[str],
    window: tuple[int, int],
) -> dict:
    """Which recorded episodes speak to which tagged concerns.

    A tag is an expression; it is associated with every goal whose predicate
    shares a feature with it, and a record matches the tag when the record's
    tick lies in the window and its goals at stake intersect the tag's
    goals. Tags nothing matches are flagged uncovered.
    """
    lo, hi = window
    if lo > hi or lo < 0:
        raise WindowOutOfRange(f"window [{lo}, {hi}] is not a valid tick range")
    ticks = [r["tick"] for r in records if "tick" in r]
    if ticks and (lo > max(ticks) or hi < min(ticks)):
        raise WindowOutOfRange(
            f"window [{lo}, {hi}] misses every recorded tick "
            f"({min(ticks)}..{max(ticks)})"
        )
    goal_features = {
        gid: goal.predicate.features()
        for gid, goal in scenario.all_goals().items()
    }
    in_window = [r for r in records if lo <= r.get("tick", -1) <= hi]
    rows = []
    matched_ids: set[int] = set()
    for tag in tags:
        tag_features = expression_features(parse_expression(tag))
        goals = sorted(
            gid
            for gid, feats in goal_features.items()
            if feats & tag_features
        )
        hits = [
            r["id"]
            for r in in_window
            if set(r.get("goals_at_stake", [])) & set(goals)
        ]
        matched_ids.update(hits)
        rows.append(
            {
                "tag": tag,
                "features": sorted(tag_features),
                "goals": goals,
                "records": hits,
                "uncovered": not hits,
            }
        )
    return {
        "window": [lo, hi],
        "tags": rows,
        "unmatched_records": sorted(
            r["id"] for r in in_window if r["id"] not in matched_ids
        ),
    }
