"""Scenario and interaction-model files: parsing, validation, serialization.

One JSON schema serves plain simulation scenarios, analysis models (which
add initial_states and depth_bound), and exported conflict test cases
(which add expected_conflict and prefix). All files declare
"format_version": 1. Validation failures carry a field path so the CLI can
point at the offending spot.

Capability adjustments (beliefs, behaviours, goals) are implemented here by
round-tripping the scenario through its JSON form and re-validating, so an
adjusted scenario obeys every structural rule a loaded one does.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Optional

from .dynamics import (
    FeatureDecl,
    Kinematic1D,
    KinematicAgent,
    ObservationSpec,
    TableTransition,
    TransitionModel,
    WorldState,
)
from .errors import EmptyActionSet, ValidationError
from .expr import Predicate, parse_predicate
from .game_core import (
    AgentModel,
    BehaviourAdjustment,
    BeliefAdjustment,
    BeliefState,
    Goal,
    GoalAdjustment,
    GoalHierarchy,
    Strategy,
    _UNSET,
)
from .vodd import VoddNetwork, network_to_json, parse_network

FORMAT_VERSION = 1


@dataclass(frozen=True)
class MonitorSpec:
    goal: str
    q: Fraction
    measure: str  # "steps" | "distance"
    distance_feature: Optional[str] = None

    def __post_init__(self):
        if self.measure not in ("steps", "distance"):
            raise ValidationError(f"unknown measure {self.measure!r}", "monitors")
        if not (0 < self.q <= 1):
            raise ValidationError("monitor q must be in (0, 1]", "monitors")
        if self.measure == "distance" and not self.distance_feature:
            raise ValidationError(
                "distance monitors need a distance_feature", "monitors"
            )


@dataclass(frozen=True)
class AuthoritySpec:
    """A scripted external authority: answers after delay ticks.

    choose is "first" (the first offered option), "none" (stays silent), or
    an explicit action id.
    """

    choose: str = "first"
    delay: int = 0

    def __post_init__(self):
        if self.delay < 0:
            raise ValidationError("authority delay must be >= 0", "authority")


@dataclass(frozen=True)
class BeliefInjection:
    tick: int
    agent: str
    feature: str
    distribution: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class AgentSpec:
    id: str
    actions: tuple[str, ...]
    goals: tuple[Goal, ...]
    hierarchy: GoalHierarchy
    observation: ObservationSpec
    normative: bool = False
    policy: str = "hold"  # "plan" | "script" | "hold"
    script: tuple[str, ...] = ()
    hold: str = ""
    fallback: tuple[str, ...] = ()
    pins: Mapping[str, tuple[Strategy, ...]] = field(default_factory=dict)

    def goal_map(self) -> dict[str, Goal]:
        return {g.id: g for g in self.goals}


@dataclass(frozen=True)
class Scenario:
    name: str
    seconds_per_tick: int
    horizon: int
    features: Mapping[str, FeatureDecl]
    transition: TransitionModel
    agents: tuple[AgentSpec, ...]
    ata: Optional[str] = None
    vodd_network: Optional[VoddNetwork] = None
    plan: Mapping[str, int] = field(default_factory=dict)
    safety_goals: tuple[str, ...] = ()
    monitors: tuple[MonitorSpec, ...] = ()
    authority: Optional[AuthoritySpec] = None
    belief_injections: tuple[BeliefInjection, ...] = ()
    terminal: Optional[Predicate] = None
    initial_states: tuple[WorldState, ...] = ()
    depth_bound: Optional[int] = None
    expected_conflict: Optional[dict] = None
    prefix: Optional[dict] = None
    source_path: Optional[str] = None
    digest: Optional[str] = None

    def initial_state(self) -> WorldState:
        return WorldState.from_mapping(
            {name: decl.init for name, decl in self.features.items()}
        )

    def agent_spec(self, agent_id: str) -> AgentSpec:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise ValidationError(f"unknown agent {agent_id!r}")

    def goal_owner(self) -> dict[str, str]:
        return {g.id: a.id for a in self.agents for g in a.goals}

    def all_goals(self) -> dict[str, Goal]:
        return {g.id: g for a in self.agents for g in a.goals}

    def build_agents(
        self, beliefs: Optional[Mapping[str, BeliefState]] = None
    ) -> tuple[AgentModel, ...]:
        """Agent models for detection, with per-tick beliefs when sensing ran."""
        out = []
        for spec in self.agents:
            belief = beliefs.get(spec.id) if beliefs else None
            if belief is not None and spec.pins:
                belief = BeliefState(belief.support, dict(spec.pins))
            out.append(
                AgentModel(
                    id=spec.id,
                    actions=spec.actions,
                    goals=spec.goals,
                    hierarchy=spec.hierarchy,
                    belief=belief,
                    normative=spec.normative,
                )
            )
        return tuple(out)


# ---------------------------------------------------------------------------
# Parsing


def _need(data: dict, key: str, where: str):
    if key not in data:
        raise ValidationError(f"missing required field {key!r}", where)
    return data[key]


def _parse_features(raw: dict) -> dict[str, FeatureDecl]:
    if not isinstance(raw, dict) or not raw:
        raise ValidationError("features must be a non-empty object", "features")
    features = {}
    for name, spec in raw.items():
        where = f"features.{name}"
        rng = _need(spec, "range", where)
        if not (isinstance(rng, list) and len(rng) == 2):
            raise ValidationError("range must be [lo, hi]", where)
        features[name] = FeatureDecl(
            name=name, lo=int(rng[0]), hi=int(rng[1]), init=int(_need(spec, "init", where))
        )
    return features


def _state_from(raw: dict, features: Mapping[str, FeatureDecl], where: str) -> WorldState:
    if set(raw) != set(features):
        missing = sorted(set(features) - set(raw))
        extra = sorted(set(raw) - set(features))
        raise ValidationError(
            f"state must valuate every declared feature "
            f"(missing {missing}, undeclared {extra})",
            where,
        )
    for name, value in raw.items():
        decl = features[name]
        if not (decl.lo <= int(value) <= decl.hi):
            raise ValidationError(
                f"{name}={value} outside [{decl.lo}, {decl.hi}]", where
            )
    return WorldState.from_mapping(raw)


def _parse_transition(
    raw: dict, features: Mapping[str, FeatureDecl]
) -> TransitionModel:
    kind = _need(raw, "kind", "transition")
    if kind == "table":
        actors = tuple(str(a) for a in _need(raw, "actors", "transition"))
        states = tuple(
            _state_from(s, features, f"transition.states[{i}]")
            for i, s in enumerate(_need(raw, "states", "transition"))
        )
        declared = set(states)
        rules = {}
        for i, rule in enumerate(_need(raw, "rules", "transition")):
            where = f"transition.rules[{i}]"
            state = _state_from(_need(rule, "state", where), features, where)
            nxt = _state_from(_need(rule, "next", where), features, where)
            if state not in declared or nxt not in declared:
                raise ValidationError("rule references an undeclared state", where)
            actions = _need(rule, "actions", where)
            if set(actions) != set(actors):
                raise ValidationError("rule must give one action per actor", where)
            key = (state, tuple((a, str(actions[a])) for a in actors))
            if key in rules:
                raise ValidationError("duplicate rule", where)
            rules[key] = nxt
        return TableTransition(actors=actors, rules=rules, states=states)
    if kind == "kinematic1d":
        cells = int(_need(raw, "cells", "transition"))
        max_speed = int(_need(raw, "max_speed", "transition"))
        agents = []
        for aid, spec in _need(raw, "agents", "transition").items():
            where = f"transition.agents.{aid}"
            pos_f = str(_need(spec, "pos", where))
            speed_f = str(_need(spec, "speed", where))
            for fname, hi_needed in ((pos_f, cells - 1), (speed_f, max_speed)):
                decl = features.get(fname)
                if decl is None:
                    raise ValidationError(f"undeclared feature {fname!r}", where)
                if decl.lo > 0 or decl.hi < hi_needed:
                    raise ValidationError(
                        f"feature {fname!r} range must cover [0, {hi_needed}]", where
                    )
            agents.append(
                KinematicAgent(
                    id=aid, lane=int(spec.get("lane", 0)),
                    pos_feature=pos_f, speed_feature=speed_f,
                )
            )
        collision_feature = str(raw.get("collision_feature", "collision"))
        if collision_feature not in features:
            raise ValidationError(
                f"undeclared collision feature {collision_feature!r}", "transition"
            )
        deltas = {str(a): int(d) for a, d in _need(raw, "actions", "transition").items()}
        obstacles = tuple(
            (int(lane), int(cell)) for lane, cell in raw.get("obstacles", [])
        )
        return Kinematic1D(
            cells=cells,
            max_speed=max_speed,
            agents=tuple(sorted(agents, key=lambda a: a.id)),
            action_deltas=deltas,
            obstacles=obstacles,
            collision_feature=collision_feature,
        )
    raise ValidationError(f"unknown transition kind {kind!r}", "transition")


def _parse_goal(raw: dict, where: str) -> Goal:
    gid = str(_need(raw, "id", where))
    kind = str(_need(raw, "kind", where))
    predicate = parse_predicate(str(_need(raw, "predicate", where)))
    bound = raw.get("horizon_bound")
    q = Fraction(str(raw["q"])) if "q" in raw and raw["q"] is not None else None
    return Goal(
        id=gid,
        kind=kind,
        predicate=predicate,
        horizon_bound=int(bound) if bound is not None else None,
        q=q,
    )


def _parse_observation(raw: dict, where: str) -> ObservationSpec:
    visible = raw.get("visible")
    confusion = {
        str(fname): {
            int(tv): {int(ov): float(p) for ov, p in dist.items()}
            for tv, dist in table.items()
        }
        for fname, table in (raw.get("confusion") or {}).items()
    }
    assumed = {str(f): int(v) for f, v in (raw.get("assumed") or {}).items()}
    return ObservationSpec(
        visible=None if visible is None else frozenset(str(f) for f in visible),
        confusion=confusion,
        assumed=assumed,
    )


def _parse_agent(raw: dict, index: int, horizon: int) -> AgentSpec:
    where = f"agents[{index}]"
    aid = str(_need(raw, "id", where))
    actions = tuple(str(a) for a in _need(raw, "actions", where))
    goals = tuple(
        _parse_goal(g, f"{where}.goals[{i}]")
        for i, g in enumerate(raw.get("goals", []))
    )
    hierarchy = GoalHierarchy(
        tuple(tuple(str(g) for g in level) for level in raw.get("hierarchy", []))
    )
    observation = _parse_observation(raw.get("observation") or {}, where)
    hold = str(raw.get("hold") or (actions[0] if actions else ""))
    fallback = tuple(str(a) for a in raw.get("fallback", [])) or (hold,)
    script = tuple(str(a) for a in raw.get("script", []))
    policy = str(raw.get("policy") or ("script" if script else "hold"))
    if policy not in ("plan", "script", "hold"):
        raise ValidationError(f"unknown policy {policy!r}", where)
    if policy == "script" and not script:
        raise ValidationError("script policy needs a script", where)
    pins = {}
    for opponent, strategies in (raw.get("believed_opponents") or {}).items():
        parsed = []
        for s in strategies:
            seq = tuple(str(a) for a in s)
            if len(seq) != horizon:
                raise ValidationError(
                    f"pinned strategy {list(seq)} must have length {horizon}",
                    f"{where}.believed_opponents.{opponent}",
                )
            parsed.append(Strategy(seq))
        pins[str(opponent)] = tuple(parsed)
    return AgentSpec(
        id=aid,
        actions=actions,
        goals=goals,
        hierarchy=hierarchy,
        observation=observation,
        normative=bool(raw.get("normative", False)),
        policy=policy,
        script=script,
        hold=hold,
        fallback=fallback,
        pins=pins,
    )


def _validate(scenario: Scenario) -> None:
    features = scenario.features
    ids = [a.id for a in scenario.agents]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate agent ids", "agents")
    owners = {}
    for a in scenario.agents:
        for g in a.goals:
            if g.id in owners:
                raise ValidationError(
                    f"goal id {g.id!r} declared by both {owners[g.id]!r} and {a.id!r}",
                    "agents",
                )
            owners[g.id] = a.id
            for fname in g.predicate.features():
                if fname not in features:
                    raise ValidationError(
                        f"goal {g.id!r} references unknown feature {fname!r}",
                        f"agents.{a.id}.goals",
                    )
        a.observation.validate(features)
        for fname, value in a.observation.assumed.items():
            decl = features.get(fname)
            if decl is None:
                raise ValidationError(
                    f"assumed value for unknown feature {fname!r}",
                    f"agents.{a.id}.observation",
                )
        where = f"agents.{a.id}"
        declared = set(a.actions)
        for action in a.script:
            if action not in declared:
                raise ValidationError(f"script uses undeclared action {action!r}", where)
        for action in a.fallback:
            if action not in declared:
                raise ValidationError(
                    f"fallback uses undeclared action {action!r}", where
                )
        if a.hold and a.hold not in declared:
            raise ValidationError(f"hold action {a.hold!r} is undeclared", where)
        for opponent, strategies in a.pins.items():
            if opponent not in ids:
                raise ValidationError(
                    f"belief pins unknown agent {opponent!r}", where
                )
            opp = scenario.agent_spec(opponent)
            for s in strategies:
                for action in s.actions:
                    if action not in opp.actions:
                        raise ValidationError(
                            f"pinned strategy uses {action!r}, not an action "
                            f"of {opponent!r}",
                            where,
                        )
    movers = {a.id for a in scenario.agents if not a.normative}
    actors = set(scenario.transition.actors)
    if actors != movers:
        raise ValidationError(
            f"transition actors {sorted(actors)} must be exactly the "
            f"non-normative agents {sorted(movers)}",
            "transition",
        )
    if isinstance(scenario.transition, TableTransition):
        actions_by_actor = {
            a.id: a.actions for a in scenario.agents if not a.normative
        }
        scenario.transition.validate_total(actions_by_actor)
        if scenario.initial_state() not in set(scenario.transition.states):
            raise ValidationError(
                "initial state is not among the declared table states", "features"
            )
        for s in scenario.initial_states:
            if s not in set(scenario.transition.states):
                raise ValidationError(
                    "initial_states entry is not a declared table state",
                    "initial_states",
                )
    if isinstance(scenario.transition, Kinematic1D):
        for a in scenario.agents:
            if a.normative:
                continue
            for action in a.actions:
                if action not in scenario.transition.action_deltas:
                    raise ValidationError(
                        f"action {action!r} of {a.id!r} has no kinematic delta",
                        "transition.actions",
                    )
    if scenario.ata is not None and scenario.ata not in ids:
        raise ValidationError(f"ata {scenario.ata!r} is not a declared agent", "ata")
    if scenario.ata is not None and scenario.agent_spec(scenario.ata).normative:
        raise ValidationError("the ata cannot be normative", "ata")
    for gid in scenario.safety_goals:
        if gid not in owners:
            raise ValidationError(f"unknown safety goal {gid!r}", "safety_goals")
    for m in scenario.monitors:
        if m.goal not in owners:
            raise ValidationError(f"monitor references unknown goal {m.goal!r}", "monitors")
        if m.distance_feature and m.distance_feature not in features:
            raise ValidationError(
                f"monitor distance feature {m.distance_feature!r} is undeclared",
                "monitors",
            )
    for name in scenario.plan:
        if name in features:
            raise ValidationError(
                f"plan feature {name!r} shadows a state feature", "plan"
            )
    for inj in scenario.belief_injections:
        if inj.agent not in ids:
            raise ValidationError(
                f"injection targets unknown agent {inj.agent!r}", "belief_injections"
            )
        if inj.feature not in features:
            raise ValidationError(
                f"injection targets unknown feature {inj.feature!r}",
                "belief_injections",
            )
        total = sum(p for _, p in inj.distribution)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(
                f"injection distribution sums to {total}", "belief_injections"
            )
        decl = features[inj.feature]
        for value, _ in inj.distribution:
            if not (decl.lo <= value <= decl.hi):
                raise ValidationError(
                    f"injected value {value} outside the range of {inj.feature!r}",
                    "belief_injections",
                )
    if scenario.terminal is not None:
        for fname in scenario.terminal.features():
            if fname not in features:
                raise ValidationError(
                    f"terminal predicate references unknown feature {fname!r}",
                    "terminal",
                )
    if scenario.vodd_network is not None:
        for v in scenario.vodd_network.vodds:
            for cond in (
                list(v.domain.entries)
                + list(v.domain.invariants)
                + list(v.domain.exits)
            ):
                for fname in cond.predicate.features():
                    if fname not in features and fname not in scenario.plan:
                        raise ValidationError(
                            f"condition {cond.id!r} references {fname!r}, which is "
                            "neither a feature nor a plan entry",
                            f"vodd_network.{v.id}",
                        )


def parse_scenario(
    data: dict,
    path: Optional[str] = None,
    digest: Optional[str] = None,
) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a JSON object")
    if data.get("format_version") != FORMAT_VERSION:
        raise ValidationError(
            f"format_version must be {FORMAT_VERSION}", "format_version"
        )
    features = _parse_features(_need(data, "features", "scenario"))
    horizon = int(_need(data, "horizon", "scenario"))
    if horizon < 1:
        raise ValidationError("horizon must be >= 1", "horizon")
    transition = _parse_transition(_need(data, "transition", "scenario"), features)
    agents = tuple(
        _parse_agent(a, i, horizon)
        for i, a in enumerate(_need(data, "agents", "scenario"))
    )
    network = None
    if data.get("vodd_network") is not None:
        network = parse_network(data["vodd_network"])
    authority = None
    if data.get("authority") is not None:
        raw = data["authority"]
        authority = AuthoritySpec(
            choose=str(raw.get("choose", "first")), delay=int(raw.get("delay", 0))
        )
    monitors = tuple(
        MonitorSpec(
            goal=str(_need(m, "goal", f"monitors[{i}]")),
            q=Fraction(str(_need(m, "q", f"monitors[{i}]"))),
            measure=str(m.get("measure", "steps")),
            distance_feature=m.get("distance_feature"),
        )
        for i, m in enumerate(data.get("monitors", []))
    )
    injections = tuple(
        BeliefInjection(
            tick=int(_need(inj, "tick", f"belief_injections[{i}]")),
            agent=str(_need(inj, "agent", f"belief_injections[{i}]")),
            feature=str(_need(inj, "feature", f"belief_injections[{i}]")),
            distribution=tuple(
                sorted((int(v), float(p)) for v, p in inj["distribution"].items())
            ),
        )
        for i, inj in enumerate(data.get("belief_injections", []))
    )
    terminal = (
        parse_predicate(str(data["terminal"])) if data.get("terminal") else None
    )
    initial_states = tuple(
        _state_from(
            {**{n: d.init for n, d in features.items()}, **overrides},
            features,
            f"initial_states[{i}]",
        )
        for i, overrides in enumerate(data.get("initial_states", []))
    )
    scenario = Scenario(
        name=str(data.get("name", path or "scenario")),
        seconds_per_tick=int(data.get("seconds_per_tick", 1)),
        horizon=horizon,
        features=features,
        transition=transition,
        agents=agents,
        ata=str(data["ata"]) if data.get("ata") is not None else None,
        vodd_network=network,
        plan={str(k): int(v) for k, v in (data.get("plan") or {}).items()},
        safety_goals=tuple(str(g) for g in data.get("safety_goals", [])),
        monitors=monitors,
        authority=authority,
        belief_injections=injections,
        terminal=terminal,
        initial_states=initial_states,
        depth_bound=(
            int(data["depth_bound"]) if data.get("depth_bound") is not None else None
        ),
        expected_conflict=data.get("expected_conflict"),
        prefix=data.get("prefix"),
        source_path=path,
        digest=digest,
    )
    if scenario.seconds_per_tick < 1:
        raise ValidationError("seconds_per_tick must be >= 1", "seconds_per_tick")
    _validate(scenario)
    return scenario


def load_scenario(path: str) -> Scenario:
    with open(path, "rb") as fh:
        raw = fh.read()
    data = json.loads(raw.decode("utf-8"))
    return parse_scenario(data, path=path, digest=hashlib.sha256(raw).hexdigest())


# ---------------------------------------------------------------------------
# Serialization


def _goal_to_json(g: Goal) -> dict:
    out = {"id": g.id, "kind": g.kind, "predicate": g.predicate.source}
    if g.horizon_bound is not None:
        out["horizon_bound"] = g.horizon_bound
    if g.q is not None:
        out["q"] = str(g.q)
    return out


def _transition_to_json(t: TransitionModel) -> dict:
    if isinstance(t, TableTransition):
        return {
            "kind": "table",
            "actors": list(t.actors),
            "states": [s.as_dict() for s in t.states],
            "rules": [
                {
                    "state": state.as_dict(),
                    "actions": dict(joint),
                    "next": nxt.as_dict(),
                }
                for (state, joint), nxt in t.rules.items()
            ],
        }
    return {
        "kind": "kinematic1d",
        "cells": t.cells,
        "max_speed": t.max_speed,
        "agents": {
            a.id: {"lane": a.lane, "pos": a.pos_feature, "speed": a.speed_feature}
            for a in t.agents
        },
        "actions": dict(t.action_deltas),
        "obstacles": [list(o) for o in t.obstacles],
        "collision_feature": t.collision_feature,
    }


def scenario_to_json(s: Scenario) -> dict:
    agents = []
    for a in s.agents:
        raw: dict = {
            "id": a.id,
            "actions": list(a.actions),
            "goals": [_goal_to_json(g) for g in a.goals],
            "hierarchy": [list(level) for level in a.hierarchy.levels],
        }
        obs: dict = {}
        if a.observation.visible is not None:
            obs["visible"] = sorted(a.observation.visible)
        if a.observation.confusion:
            obs["confusion"] = {
                f: {str(tv): {str(ov): p for ov, p in dist.items()}
                    for tv, dist in table.items()}
                for f, table in a.observation.confusion.items()
            }
        if a.observation.assumed:
            obs["assumed"] = dict(a.observation.assumed)
        if obs:
            raw["observation"] = obs
        if a.normative:
            raw["normative"] = True
        if a.policy != ("script" if a.script else "hold"):
            raw["policy"] = a.policy
        if a.script:
            raw["script"] = list(a.script)
        if a.hold != a.actions[0]:
            raw["hold"] = a.hold
        if a.fallback != (a.hold,):
            raw["fallback"] = list(a.fallback)
        if a.pins:
            raw["believed_opponents"] = {
                o: [list(st.actions) for st in strategies]
                for o, strategies in a.pins.items()
            }
        agents.append(raw)
    out: dict = {
        "format_version": FORMAT_VERSION,
        "name": s.name,
        "seconds_per_tick": s.seconds_per_tick,
        "horizon": s.horizon,
        "features": {
            n: {"range": [d.lo, d.hi], "init": d.init}
            for n, d in s.features.items()
        },
        "transition": _transition_to_json(s.transition),
        "agents": agents,
    }
    if s.ata is not None:
        out["ata"] = s.ata
    if s.vodd_network is not None:
        out["vodd_network"] = network_to_json(s.vodd_network)
    if s.plan:
        out["plan"] = dict(s.plan)
    if s.safety_goals:
        out["safety_goals"] = list(s.safety_goals)
    if s.monitors:
        out["monitors"] = [
            {
                "goal": m.goal,
                "q": str(m.q),
                "measure": m.measure,
                **({"distance_feature": m.distance_feature}
                   if m.distance_feature else {}),
            }
            for m in s.monitors
        ]
    if s.authority is not None:
        out["authority"] = {"choose": s.authority.choose, "delay": s.authority.delay}
    if s.belief_injections:
        out["belief_injections"] = [
            {
                "tick": inj.tick,
                "agent": inj.agent,
                "feature": inj.feature,
                "distribution": {str(v): p for v, p in inj.distribution},
            }
            for inj in s.belief_injections
        ]
    if s.terminal is not None:
        out["terminal"] = s.terminal.source
    if s.initial_states:
        out["initial_states"] = [st.as_dict() for st in s.initial_states]
    if s.depth_bound is not None:
        out["depth_bound"] = s.depth_bound
    if s.expected_conflict is not None:
        out["expected_conflict"] = s.expected_conflict
    if s.prefix is not None:
        out["prefix"] = s.prefix
    return out


# ---------------------------------------------------------------------------
# Adjustments


def adjusted(scenario: Scenario, adjustment) -> Scenario:
    data = copy.deepcopy(scenario_to_json(scenario))
    agents = data["agents"]

    def agent_raw(agent_id: str) -> dict:
        for raw in agents:
            if raw["id"] == agent_id:
                return raw
        raise ValidationError(f"adjustment targets unknown agent {agent_id!r}")

    if isinstance(adjustment, BeliefAdjustment):
        raw = agent_raw(adjustment.agent)
        obs = raw.setdefault("observation", {})
        visible = obs.get("visible")
        if visible is None:
            visible = sorted(data["features"])
        visible = set(visible)
        for fname in adjustment.unmask:
            visible.add(fname)
        for fname in adjustment.mask:
            visible.discard(fname)
        obs["visible"] = sorted(visible)
        if adjustment.clear_pins:
            raw.pop("believed_opponents", None)
        if adjustment.pin_opponent is not None:
            pins = raw.setdefault("believed_opponents", {})
            for opponent, strategies in adjustment.pin_opponent.items():
                pins[opponent] = [list(s) for s in strategies]
    elif isinstance(adjustment, BehaviourAdjustment):
        raw = agent_raw(adjustment.agent)
        actions = [a for a in raw["actions"] if a not in adjustment.remove]
        for action in adjustment.add:
            if action not in actions:
                actions.append(action)
        if not actions:
            raise EmptyActionSet(
                f"adjustment leaves agent {adjustment.agent!r} without actions"
            )
        raw["actions"] = actions
        removed = set(adjustment.remove)
        if raw.get("hold") in removed:
            raw.pop("hold")
        if any(a in removed for a in raw.get("fallback", [])):
            raw.pop("fallback")
        if any(a in removed for a in raw.get("script", [])):
            raw["script"] = [a for a in raw["script"] if a not in removed]
            if not raw["script"]:
                raw.pop("script")
                if raw.get("policy") == "script":
                    raw["policy"] = "hold"
        # prune table rules that mention removed actions of this agent
        if data["transition"]["kind"] == "table" and removed:
            data["transition"]["rules"] = [
                r
                for r in data["transition"]["rules"]
                if r["actions"].get(adjustment.agent) not in removed
            ]
    elif isinstance(adjustment, GoalAdjustment):
        raw = agent_raw(adjustment.agent)
        target = None
        for g in raw.get("goals", []):
            if g["id"] == adjustment.goal:
                target = g
                break
        if target is None:
            raise ValidationError(
                f"adjustment targets unknown goal {adjustment.goal!r}"
            )
        if adjustment.kind is not None:
            target["kind"] = adjustment.kind
        if adjustment.predicate is not None:
            target["predicate"] = adjustment.predicate
        if adjustment.horizon_bound is not _UNSET:
            if adjustment.horizon_bound is None:
                target.pop("horizon_bound", None)
            else:
                target["horizon_bound"] = int(adjustment.horizon_bound)
        if adjustment.q is not None:
            target["q"] = str(adjustment.q)
        if adjustment.level is not None:
            levels = [
                [g for g in level if g != adjustment.goal]
                for level in raw["hierarchy"]
            ]
            while len(levels) <= adjustment.level:
                levels.append([])
            levels[adjustment.level].append(adjustment.goal)
            raw["hierarchy"] = [level for level in levels if level]
    else:
        raise ValidationError(
            f"unsupported adjustment type {type(adjustment).__name__}"
        )
    return parse_scenario(data, path=None, digest=None)
