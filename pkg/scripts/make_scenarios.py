#!/usr/bin/env python3
"""Regenerate the shipped scenario files.

Each scenario's dynamics are enumerated here as plain loops, then dumped to
scenarios/*.json with sorted keys so regeneration is byte-stable. Run from
anywhere:

    python scripts/make_scenarios.py
"""

from __future__ import annotations

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "scenarios"


def dump(name: str, data: dict) -> None:
    OUT.mkdir(exist_ok=True)
    path = OUT / f"{name}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# narrowing_road: two cars meet a one-lane stretch. Proceeding together
# collides; yielding together stalls. Either order of passing works, but
# nobody can satisfy everything at once.


def narrowing_road() -> dict:
    def state(a, b, col):
        return {"a": a, "b": b, "col": col}

    rules = []

    def rule(s, act_a, act_b, nxt):
        rules.append({"state": s, "actions": {"car_a": act_a, "car_b": act_b}, "next": nxt})

    s0 = state(0, 0, 0)
    sa = state(1, 0, 0)
    sb = state(0, 1, 0)
    sab = state(1, 1, 0)
    sc = state(0, 0, 1)
    states = [s0, sa, sb, sab, sc]

    rule(s0, "proceed", "proceed", sc)
    rule(s0, "proceed", "yield", sa)
    rule(s0, "yield", "proceed", sb)
    rule(s0, "yield", "yield", s0)
    # once one car is through, only the other's action matters
    for act_a in ("proceed", "yield"):
        rule(sa, act_a, "proceed", sab)
        rule(sa, act_a, "yield", sa)
    for act_b in ("proceed", "yield"):
        rule(sb, "proceed", act_b, sab)
        rule(sb, "yield", act_b, sb)
    for act_a in ("proceed", "yield"):
        for act_b in ("proceed", "yield"):
            rule(sab, act_a, act_b, sab)
            rule(sc, act_a, act_b, sc)

    return {
        "format_version": 1,
        "name": "narrowing_road",
        "seconds_per_tick": 1,
        "horizon": 1,
        "features": {
            "a": {"range": [0, 1], "init": 0},
            "b": {"range": [0, 1], "init": 0},
            "col": {"range": [0, 1], "init": 0},
        },
        "transition": {
            "kind": "table",
            "actors": ["car_a", "car_b"],
            "states": states,
            "rules": rules,
        },
        "agents": [
            {
                "id": "car_a",
                "actions": ["proceed", "yield"],
                "goals": [
                    {"id": "g1_a", "kind": "eventually", "predicate": "a = 1"},
                    {"id": "g2_a", "kind": "always", "predicate": "col = 0"},
                ],
                "hierarchy": [["g1_a", "g2_a"]],
                "hold": "yield",
                "fallback": ["yield"],
            },
            {
                "id": "car_b",
                "actions": ["proceed", "yield"],
                "goals": [
                    {"id": "g1_b", "kind": "eventually", "predicate": "b = 1"},
                    {"id": "g2_b", "kind": "always", "predicate": "col = 0"},
                ],
                "hierarchy": [["g1_b", "g2_b"]],
                "script": ["proceed"],
            },
        ],
        "ata": "car_a",
        "safety_goals": ["g2_a"],
        "vodd_network": {
            "format_version": 1,
            "default_authority": "remote_operator",
            "initial": "shared_stretch",
            "vodds": [
                {
                    "id": "shared_stretch",
                    "scope": [["traffic_flow"]],
                    "domain": {"entries": [], "invariants": [], "exits": []},
                }
            ],
        },
        "authority": {"choose": "yield", "delay": 0},
        "monitors": [{"goal": "g2_a", "q": "1/2", "measure": "steps"}],
        "depth_bound": 4,
    }


# ---------------------------------------------------------------------------
# cyclist_overtake: an automated vehicle passes a cyclist whose sensitivity
# it cannot see. Passing close finishes the overtake in one move but
# startles a sensitive cyclist; swinging wide takes two moves.


def cyclist_overtake() -> dict:
    def state(phase, discomfort, sensitive):
        return {"phase": phase, "discomfort": discomfort, "sensitive": sensitive}

    states = [
        state(p, d, sv) for p in (0, 1, 2) for d in (0, 1) for sv in (0, 1)
    ]
    rules = []
    for p in (0, 1, 2):
        for d in (0, 1):
            for sv in (0, 1):
                here = state(p, d, sv)
                if p == 0:
                    nxt_close = state(2, sv, sv)
                    nxt_wide = state(1, 0, sv)
                else:
                    nxt_close = state(2, 0, sv)
                    nxt_wide = state(2, 0, sv)
                rules.append(
                    {"state": here, "actions": {"av": "overtake_close"}, "next": nxt_close}
                )
                rules.append(
                    {"state": here, "actions": {"av": "overtake_wide"}, "next": nxt_wide}
                )

    return {
        "format_version": 1,
        "name": "cyclist_overtake",
        "seconds_per_tick": 1,
        "horizon": 2,
        "features": {
            "phase": {"range": [0, 2], "init": 0},
            "discomfort": {"range": [0, 1], "init": 0},
            "sensitive": {"range": [0, 1], "init": 1},
        },
        "transition": {
            "kind": "table",
            "actors": ["av"],
            "states": states,
            "rules": rules,
        },
        "agents": [
            {
                "id": "av",
                "actions": ["overtake_close", "overtake_wide"],
                "goals": [
                    {
                        "id": "g_travel",
                        "kind": "eventually",
                        "predicate": "phase = 2",
                        "horizon_bound": 1,
                    }
                ],
                "hierarchy": [["g_travel"]],
                "observation": {
                    "visible": ["phase", "discomfort"],
                    "assumed": {"sensitive": 0},
                },
                "hold": "overtake_wide",
                "fallback": ["overtake_wide"],
            },
            {
                "id": "cyclist",
                "actions": ["ride"],
                "goals": [
                    {
                        "id": "g_comfort",
                        "kind": "always",
                        "predicate": "discomfort = 0",
                    }
                ],
                "hierarchy": [["g_comfort"]],
                "normative": True,
            },
        ],
        "ata": "av",
        "vodd_network": {
            "format_version": 1,
            "default_authority": "operator",
            "initial": "overtaking",
            "vodds": [
                {
                    "id": "overtaking",
                    "scope": [["g_travel"]],
                    "domain": {"entries": [], "invariants": [], "exits": []},
                }
            ],
        },
        "monitors": [{"goal": "g_comfort", "q": "1/2", "measure": "steps"}],
        "depth_bound": 3,
    }


# ---------------------------------------------------------------------------
# highway_vodd: cruise inside a domain of validity whose conditions watch
# the trip plan and traffic. One tick is ten seconds of road time, so the
# thresholds below are already expressed in ticks.


def highway_vodd() -> dict:
    speeds = (1, 2, 3)
    pcts = (10, 25)
    traffics = (0, 1)
    exits = (3, 10)

    def state(speed, pct, tn, ex):
        return {
            "speed": speed,
            "on_highway": 1,
            "traffic_normal": tn,
            "travel_time_increase_pct": pct,
            "must_exit_in_ticks": ex,
        }

    states = [
        state(s, p, t, e)
        for s in speeds
        for p in pcts
        for t in traffics
        for e in exits
    ]
    target = {"eco": 1, "cruise": 2, "fast": 3}
    rules = []
    for s in speeds:
        for p in pcts:
            for t in traffics:
                for e in exits:
                    for action, nxt_speed in target.items():
                        rules.append(
                            {
                                "state": state(s, p, t, e),
                                "actions": {"ego": action},
                                "next": state(nxt_speed, p, t, e),
                            }
                        )

    return {
        "format_version": 1,
        "name": "highway_vodd",
        "seconds_per_tick": 10,
        "horizon": 1,
        "features": {
            "speed": {"range": [1, 3], "init": 2},
            "on_highway": {"range": [0, 1], "init": 1},
            "traffic_normal": {"range": [0, 1], "init": 1},
            "travel_time_increase_pct": {"range": [0, 100], "init": 10},
            "must_exit_in_ticks": {"range": [0, 10], "init": 10},
        },
        "transition": {
            "kind": "table",
            "actors": ["ego"],
            "states": states,
            "rules": rules,
        },
        "agents": [
            {
                "id": "ego",
                "actions": ["eco", "cruise", "fast"],
                "goals": [
                    {"id": "g_eco", "kind": "always", "predicate": "speed <= 2"},
                    {"id": "g_quick", "kind": "always", "predicate": "speed >= 2"},
                ],
                "hierarchy": [["g_eco", "g_quick"]],
                "hold": "cruise",
                "fallback": ["eco"],
            }
        ],
        "ata": "ego",
        "plan": {"plan_exit_ticks": 8, "mission_target": 1},
        "vodd_network": {
            "format_version": 1,
            "default_authority": "remote_operator",
            "initial": "highway_cruise",
            "vodds": [
                {
                    "id": "highway_cruise",
                    "scope": [["g_eco", "g_quick"]],
                    "tiebreak": [["g_quick", 2.0], ["g_eco", 1.0]],
                    "domain": {
                        "entries": [
                            {
                                "id": "En1",
                                "predicate": "plan_exit_ticks >= 6",
                                "threshold": 0.9,
                            }
                        ],
                        "invariants": [
                            {
                                "id": "In1",
                                "predicate": "plan_exit_ticks >= 3",
                                "threshold": 0.95,
                            },
                            {
                                "id": "In2",
                                "predicate": "mission_target = 1",
                                "threshold": 0.95,
                            },
                            {
                                "id": "In3",
                                "predicate": "on_highway = 1 and traffic_normal = 1",
                                "threshold": 0.9,
                            },
                        ],
                        "exits": [
                            {
                                "id": "Ex1",
                                "predicate": "travel_time_increase_pct > 20",
                                "threshold": 0.85,
                                "authority": "driver",
                            },
                            {
                                "id": "Ex2",
                                "predicate": "must_exit_in_ticks <= 3",
                                "threshold": 0.7,
                                "authority": {"vodd": "exit_manoeuvre"},
                            },
                        ],
                    },
                },
                {
                    "id": "exit_manoeuvre",
                    "scope": [["g_quick"]],
                    "domain": {
                        "entries": [
                            {
                                "id": "EnX",
                                "predicate": "must_exit_in_ticks <= 3",
                                "threshold": 0.5,
                            }
                        ],
                        "invariants": [],
                        "exits": [],
                    },
                },
            ],
        },
        "belief_injections": [
            {
                "tick": 2,
                "agent": "ego",
                "feature": "travel_time_increase_pct",
                "distribution": {"25": 0.86, "10": 0.14},
            }
        ],
        "monitors": [{"goal": "g_eco", "q": "3/4", "measure": "steps"}],
    }


# ---------------------------------------------------------------------------
# approach_blockage: a single vehicle rolls toward a blocked cell. Arrival
# and safety cannot both be had; a narrow scope forces the decision out to
# the authority, and the fallback brakes to a stop.


def approach_blockage() -> dict:
    return {
        "format_version": 1,
        "name": "approach_blockage",
        "seconds_per_tick": 1,
        "horizon": 4,
        "features": {
            "pos": {"range": [0, 19], "init": 0},
            "spd": {"range": [0, 3], "init": 2},
            "collision": {"range": [0, 1], "init": 0},
        },
        "transition": {
            "kind": "kinematic1d",
            "cells": 20,
            "max_speed": 3,
            "agents": {"ego": {"lane": 0, "pos": "pos", "speed": "spd"}},
            "actions": {"keep": 0, "accel": 1, "decel": -1},
            "obstacles": [[0, 12]],
            "collision_feature": "collision",
        },
        "agents": [
            {
                "id": "ego",
                "actions": ["keep", "accel", "decel"],
                "goals": [
                    {"id": "g_arrive", "kind": "eventually", "predicate": "pos >= 12"},
                    {"id": "g_safe", "kind": "always", "predicate": "collision = 0"},
                ],
                "hierarchy": [["g_arrive", "g_safe"]],
                "hold": "keep",
                "fallback": ["decel"],
            }
        ],
        "ata": "ego",
        "safety_goals": ["g_safe"],
        "vodd_network": {
            "format_version": 1,
            "default_authority": "remote_operator",
            "initial": "corridor",
            "vodds": [
                {
                    "id": "corridor",
                    "scope": [["traffic_flow"]],
                    "domain": {"entries": [], "invariants": [], "exits": []},
                }
            ],
        },
        "authority": {"choose": "decel", "delay": 1},
        "monitors": [
            {
                "goal": "g_safe",
                "q": "9/10",
                "measure": "distance",
                "distance_feature": "pos",
            }
        ],
    }


def main() -> None:
    dump("narrowing_road", narrowing_road())
    dump("cyclist_overtake", cyclist_overtake())
    dump("highway_vodd", highway_vodd())
    dump("approach_blockage", approach_blockage())


if __name__ == "__main__":
    main()
