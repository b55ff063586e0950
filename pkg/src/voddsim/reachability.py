"""Breadth-first conflict discovery over an interaction model.

A model is an ordinary scenario, optionally with explicit initial states
and a depth bound. The explorer walks every joint action in canonical
order, runs conflict detection each time it reaches a state it has not
seen, and keeps one finding per (state, participants, goals at stake)
with the shortest action prefix that got there. The search budget is
cumulative over all detection work in the walk.

Findings can be exported as loadable scenario files so each discovered
conflict becomes a standalone regression case.
"""

from __future__ import annotations

import itertools
import json
import os
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

from .dynamics import WorldState
from .errors import NoInitialStates, SearchBudgetExceeded
from .game_core import (
    DEFAULT_BUDGET,
    BeliefState,
    Conflict,
    classify_conflict,
    detect_actual_conflict,
    detect_believed_conflict,
)
from .scenario import Scenario, scenario_to_json
from .world_sim import build_frame


@dataclass(frozen=True)
class ConflictFinding:
    state: WorldState
    conflict: Conflict
    prefix: tuple[tuple[tuple[str, str], ...], ...]  # joint actions, sorted items
    initial_index: int
    depth: int


def anchored_belief(scenario: Scenario, agent_id: str, state: WorldState) -> BeliefState:
    """What the agent would believe standing at this state: visible features
    at their true values, hidden ones at assumed defaults, no noise."""
    spec = scenario.agent_spec(agent_id)
    obs = spec.observation
    believed = {}
    for name, decl in scenario.features.items():
        if obs.sees(name):
            believed[name] = state[name]
        else:
            believed[name] = obs.assumed.get(name, decl.init)
    return BeliefState(support=((WorldState.from_mapping(believed), 1.0),))


def _believed_cost(scenario: Scenario, agent_id: str) -> int:
    spec = scenario.agent_spec(agent_id)
    h = scenario.horizon
    n = len(spec.actions) ** h
    for other in scenario.agents:
        if other.id == agent_id or other.normative:
            continue
        pinned = spec.pins.get(other.id)
        n *= len(pinned) if pinned else len(other.actions) ** h
    return n  # one evaluation state: the anchored point belief


def _actual_cost(scenario: Scenario) -> int:
    n = 1
    for spec in scenario.agents:
        if not spec.normative:
            n *= len(spec.actions) ** scenario.horizon
    return n


def _detect_at(
    scenario: Scenario,
    state: WorldState,
    truth_agents,
    spent: int,
    budget: int,
) -> tuple[Optional[Conflict], int]:
    believed = None
    if scenario.ata is not None:
        cost = _believed_cost(scenario, scenario.ata)
        if spent + cost > budget:
            raise SearchBudgetExceeded(spent + cost, budget)
        spent += cost
        beliefs = {scenario.ata: anchored_belief(scenario, scenario.ata, state)}
        frame = build_frame(scenario, scenario.ata, beliefs)
        believed = detect_believed_conflict(scenario.ata, frame, budget)
    cost = _actual_cost(scenario)
    if spent + cost > budget:
        raise SearchBudgetExceeded(spent + cost, budget)
    spent += cost
    actual = detect_actual_conflict(
        state, truth_agents, scenario.transition, scenario.horizon, budget
    )
    return classify_conflict(believed, actual), spent


def explore(
    scenario: Scenario,
    depth: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    initial_states: Optional[Sequence[WorldState]] = None,
) -> list[ConflictFinding]:
    """Everything that can go wrong within reach, shortest prefixes first."""
    if initial_states is None:
        initial_states = scenario.initial_states or (scenario.initial_state(),)
    if not initial_states:
        raise NoInitialStates("the model declares no initial states")
    if depth is None:
        depth = scenario.depth_bound if scenario.depth_bound is not None else 5
    movers = [a for a in scenario.agents if not a.normative]
    joint_space = [
        tuple(sorted(zip((a.id for a in movers), combo)))
        for combo in itertools.product(*(a.actions for a in movers))
    ]
    truth_agents = scenario.build_agents(None)
    spent = 0
    seen_states: set[WorldState] = set()
    seen_conflicts: set = set()
    findings: list[ConflictFinding] = []
    queue: deque = deque()
    for index, start in enumerate(initial_states):
        if start in seen_states:
            continue
        seen_states.add(start)
        queue.append((start, (), index, 0))
    while queue:
        state, prefix, origin, d = queue.popleft()
        conflict, spent = _detect_at(scenario, state, truth_agents, spent, budget)
        if conflict is not None:
            key = (state.items, conflict.participants, conflict.goals_at_stake)
            if key not in seen_conflicts:
                seen_conflicts.add(key)
                findings.append(
                    ConflictFinding(
                        state=state,
                        conflict=conflict,
                        prefix=prefix,
                        initial_index=origin,
                        depth=d,
                    )
                )
        if d >= depth:
            continue
        for joint in joint_space:
            nxt = scenario.transition.step(state, dict(joint))
            if nxt in seen_states:
                continue
            seen_states.add(nxt)
            queue.append((nxt, prefix + (joint,), origin, d + 1))
    return findings


# ---------------------------------------------------------------------------
# Export


def finding_to_case(
    scenario: Scenario, finding: ConflictFinding, name: str
) -> dict:
    data = scenario_to_json(scenario)
    data["name"] = name
    for fname, value in finding.state.items:
        data["features"][fname]["init"] = value
    data.pop("initial_states", None)
    data.pop("depth_bound", None)
    data["expected_conflict"] = {
        "kind": finding.conflict.kind,
        "participants": sorted(finding.conflict.participants),
        "goals_at_stake": sorted(finding.conflict.goals_at_stake),
    }
    data["prefix"] = {
        "initial_index": finding.initial_index,
        "depth": finding.depth,
        "joint_actions": [dict(joint) for joint in finding.prefix],
    }
    return data


def export_test_cases(
    scenario: Scenario, findings: Sequence[ConflictFinding], out_dir: str
) -> list[str]:
    """One loadable scenario file per finding, byte-deterministic."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, finding in enumerate(findings):
        name = f"{scenario.name}_case_{i:03d}"
        data = finding_to_case(scenario, finding, name)
        path = os.path.join(out_dir, f"case_{i:03d}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, sort_keys=True, indent=2)
            fh.write("\n")
        paths.append(path)
    return paths
