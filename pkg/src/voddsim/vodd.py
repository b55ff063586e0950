"""Value-aligned operational design domains.

A Vodd bundles the goals an agent may autonomously sacrifice (its scope),
a domain of validity expressed as entry, invariant, and exit conditions,
and optional tiebreak weights refining choices among incomparable scope
goals. Conditions are predicates over believed state and plan features,
gated by confidence thresholds: the confidence of a predicate is the total
belief mass on support states satisfying it.

Per tick the engine checks, in order: invariants (a breach hands control
to the network's default authority), then exit conditions in declaration
order (the first firing one switches to a sibling domain when it can be
entered, otherwise delegates), and otherwise stays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import DanglingVoddRef, ValidationError
from .expr import Predicate, parse_predicate
from .game_core import (
    DEFAULT_BUDGET,
    BeliefState,
    Conflict,
    GoalHierarchy,
    GoalId,
    Ordering,
    SatisfactionVector,
    StrategicFrame,
    compare_vectors,
    maximal_consequences,
)


@dataclass(frozen=True)
class Condition:
    id: str
    predicate: Predicate
    threshold: float

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise ValidationError(
                f"threshold {self.threshold} outside [0, 1]", self.id
            )


@dataclass(frozen=True)
class VoddRef:
    vodd_id: str


Authority = str | VoddRef


@dataclass(frozen=True)
class ExitCondition(Condition):
    authority: Authority = "default"


@dataclass(frozen=True)
class Domain:
    entries: tuple[Condition, ...] = ()
    invariants: tuple[Condition, ...] = ()
    exits: tuple[ExitCondition, ...] = ()


@dataclass(frozen=True)
class Vodd:
    id: str
    scope: GoalHierarchy
    domain: Domain
    tiebreak: tuple[tuple[GoalId, float], ...] = ()

    def __post_init__(self):
        scope_ids = set(self.scope.goal_ids())
        if not scope_ids:
            raise ValidationError("scope must not be empty", self.id)
        for gid, weight in self.tiebreak:
            if gid not in scope_ids:
                raise ValidationError(
                    f"tiebreak goal {gid!r} is not in scope", self.id
                )
            if weight <= 0:
                raise ValidationError(
                    f"tiebreak weight for {gid!r} must be positive", self.id
                )

    def scope_ids(self) -> frozenset[GoalId]:
        return frozenset(self.scope.goal_ids())


@dataclass(frozen=True)
class VoddNetwork:
    vodds: tuple[Vodd, ...]
    default_authority: str
    initial: str

    def __post_init__(self):
        ids = [v.id for v in self.vodds]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate vodd ids in network")
        if self.initial not in ids:
            raise DanglingVoddRef(f"initial vodd {self.initial!r} does not exist")
        for v in self.vodds:
            for exit_cond in v.domain.exits:
                if isinstance(exit_cond.authority, VoddRef):
                    if exit_cond.authority.vodd_id not in ids:
                        raise DanglingVoddRef(
                            f"exit {exit_cond.id!r} of {v.id!r} references "
                            f"unknown vodd {exit_cond.authority.vodd_id!r}"
                        )

    def get(self, vodd_id: str) -> Vodd:
        for v in self.vodds:
            if v.id == vodd_id:
                return v
        raise DanglingVoddRef(f"unknown vodd {vodd_id!r}")


@dataclass
class EngineState:
    active: Optional[str]


# Verdicts


@dataclass(frozen=True)
class Stay:
    pass


@dataclass(frozen=True)
class Switch:
    vodd: str


@dataclass(frozen=True)
class Delegate:
    authority: str
    condition: str


@dataclass(frozen=True)
class InvariantBreach:
    authority: str
    condition: str


Verdict = Stay | Switch | Delegate | InvariantBreach


def verdict_to_json(verdict: Verdict) -> dict:
    if isinstance(verdict, Stay):
        return {"kind": "stay"}
    if isinstance(verdict, Switch):
        return {"kind": "switch", "vodd": verdict.vodd}
    if isinstance(verdict, Delegate):
        return {"kind": "delegate", "authority": verdict.authority,
                "condition": verdict.condition}
    return {"kind": "invariant_breach", "authority": verdict.authority,
            "condition": verdict.condition}


def confidence(
    belief: BeliefState,
    predicate: Predicate,
    plan: Optional[Mapping[str, int]] = None,
) -> float:
    """Total belief mass on support states satisfying the predicate.

    Plan features are certain and shared, so they extend (and on a clash
    override) each support state's features.
    """
    total = 0.0
    for state, mass in belief.support:
        env = state.as_dict()
        if plan:
            env.update(plan)
        if predicate.evaluate(env):
            total += mass
    return total


def can_enter(
    vodd: Vodd,
    belief: BeliefState,
    plan: Optional[Mapping[str, int]] = None,
) -> bool:
    """Every entry condition must reach its confidence threshold. Exact
    comparison, no tolerance."""
    return all(
        confidence(belief, cond.predicate, plan) >= cond.threshold
        for cond in vodd.domain.entries
    )


def step(
    network: VoddNetwork,
    engine: EngineState,
    belief: BeliefState,
    plan: Optional[Mapping[str, int]] = None,
) -> Verdict:
    """One engine consultation. Pure: the caller applies Switch verdicts.

    Entry conditions of the active domain are not re-checked while it stays
    active; they gate switching into a domain only.
    """
    if engine.active is None:
        raise DanglingVoddRef("engine has no active vodd")
    active = network.get(engine.active)
    for cond in active.domain.invariants:
        if confidence(belief, cond.predicate, plan) < cond.threshold:
            return InvariantBreach(network.default_authority, cond.id)
    for cond in active.domain.exits:
        if confidence(belief, cond.predicate, plan) >= cond.threshold:
            if isinstance(cond.authority, VoddRef):
                target = network.get(cond.authority.vodd_id)
                if can_enter(target, belief, plan):
                    return Switch(target.id)
                return Delegate(network.default_authority, cond.id)
            return Delegate(cond.authority, cond.id)
    return Stay()


# ---------------------------------------------------------------------------
# Scope checks and in-scope resolution


@dataclass(frozen=True)
class Option:
    """A candidate first action with its per-goal consequence summary."""

    action: str
    sacrifices: frozenset[GoalId]
    preserves: frozenset[GoalId]


def build_options(
    frame: StrategicFrame,
    agent_id: str,
    at_stake: frozenset[GoalId],
    budget: int = DEFAULT_BUDGET,
) -> tuple[Option, ...]:
    """Candidate first actions for settling a conflict.

    One option per undominated strategy, collapsed by first action (the
    canonically least strategy wins the collapse). An option sacrifices the
    at-stake goals its strategy fails in some believed context and preserves
    the rest.
    """
    rows = maximal_consequences(frame, agent_id, at_stake, budget)
    seen: dict[str, Option] = {}
    for strategy, fails in rows:
        first = strategy.actions[0]
        if first in seen:
            continue
        seen[first] = Option(
            action=first, sacrifices=fails, preserves=at_stake - fails
        )
    return tuple(seen.values())


def within_scope(
    conflict: Conflict,
    vodd: Vodd,
    options: Sequence[Option],
    exits_firing: bool = False,
) -> bool:
    """May the agent settle this conflict itself?

    Yes iff some option sacrifices only goals the scope authorises and no
    exit condition is currently firing (a firing exit means control is
    already leaving the domain).
    """
    if exits_firing:
        return False
    scope = vodd.scope_ids()
    return any(o.sacrifices <= scope for o in options)


def _scope_vector(vodd: Vodd, option: Option) -> SatisfactionVector:
    return SatisfactionVector(
        tuple(
            tuple(gid not in option.sacrifices for gid in level)
            for level in vodd.scope.levels
        )
    )


def resolve(conflict: Conflict, vodd: Vodd, options: Sequence[Option]) -> str:
    """Pick the in-scope action.

    Among options whose sacrifices stay inside the scope, keep those maximal
    under the scope's level-lexicographic Pareto order, then prefer the
    highest tiebreak-weighted count of preserved scope goals, then the first
    option in the given (canonical action) order. Deterministic throughout.
    """
    scope = vodd.scope_ids()
    authorized = [o for o in options if o.sacrifices <= scope]
    if not authorized:
        raise ValidationError(
            f"no option is within scope of vodd {vodd.id!r}; resolve requires "
            "a prior within_scope check"
        )
    vectors = [_scope_vector(vodd, o) for o in authorized]
    maximal = []
    for i, (option, vec) in enumerate(zip(authorized, vectors)):
        beaten = any(
            compare_vectors(other, vec) is Ordering.DOMINATES
            for j, other in enumerate(vectors)
            if j != i
        )
        if not beaten:
            maximal.append(option)
    weights = dict(vodd.tiebreak)
    best = None
    best_score = None
    for option in maximal:
        score = sum(
            weights.get(gid, 0.0)
            for gid in scope
            if gid not in option.sacrifices
        )
        if best is None or score > best_score:
            best = option
            best_score = score
    return best.action


# ---------------------------------------------------------------------------
# Network file format


def parse_authority(raw) -> Authority:
    if isinstance(raw, str):
        return raw
    if isinstance(raw, dict) and set(raw) == {"vodd"}:
        return VoddRef(str(raw["vodd"]))
    raise ValidationError(f"authority must be a name or {{'vodd': id}}, got {raw!r}")


def _parse_condition(raw: dict, where: str) -> dict:
    if not isinstance(raw, dict):
        raise ValidationError("condition must be an object", where)
    for key in ("id", "predicate", "threshold"):
        if key not in raw:
            raise ValidationError(f"condition missing {key!r}", where)
    return {
        "id": str(raw["id"]),
        "predicate": parse_predicate(str(raw["predicate"])),
        "threshold": float(raw["threshold"]),
    }


def parse_network(data: dict, where: str = "vodd_network") -> VoddNetwork:
    if not isinstance(data, dict):
        raise ValidationError("network must be an object", where)
    raw_vodds = data.get("vodds")
    if not isinstance(raw_vodds, list) or not raw_vodds:
        raise ValidationError("network needs a non-empty 'vodds' list", where)
    vodds = []
    for raw in raw_vodds:
        vid = str(raw.get("id", ""))
        if not vid:
            raise ValidationError("vodd missing id", where)
        scope_raw = raw.get("scope")
        if not isinstance(scope_raw, list) or not scope_raw:
            raise ValidationError("vodd scope must be a non-empty list of levels", vid)
        scope = GoalHierarchy(
            tuple(tuple(str(g) for g in level) for level in scope_raw)
        )
        domain_raw = raw.get("domain", {})
        entries = tuple(
            Condition(**_parse_condition(c, f"{vid}.entries"))
            for c in domain_raw.get("entries", [])
        )
        invariants = tuple(
            Condition(**_parse_condition(c, f"{vid}.invariants"))
            for c in domain_raw.get("invariants", [])
        )
        exits = []
        for c in domain_raw.get("exits", []):
            fields = _parse_condition(c, f"{vid}.exits")
            if "authority" not in c:
                raise ValidationError(f"exit {fields['id']!r} missing authority", vid)
            exits.append(
                ExitCondition(authority=parse_authority(c["authority"]), **fields)
            )
        tiebreak = tuple(
            (str(g), float(w)) for g, w in (raw.get("tiebreak") or [])
        )
        vodds.append(
            Vodd(
                id=vid,
                scope=scope,
                domain=Domain(entries, invariants, tuple(exits)),
                tiebreak=tiebreak,
            )
        )
    if "default_authority" not in data:
        raise ValidationError("network missing default_authority", where)
    if "initial" not in data:
        raise ValidationError("network missing initial vodd", where)
    return VoddNetwork(
        vodds=tuple(vodds),
        default_authority=str(data["default_authority"]),
        initial=str(data["initial"]),
    )


def network_to_json(network: VoddNetwork) -> dict:
    def authority_json(a: Authority):
        return {"vodd": a.vodd_id} if isinstance(a, VoddRef) else a

    return {
        "default_authority": network.default_authority,
        "initial": network.initial,
        "vodds": [
            {
                "id": v.id,
                "scope": [list(level) for level in v.scope.levels],
                "tiebreak": [[g, w] for g, w in v.tiebreak],
                "domain": {
                    "entries": [
                        {"id": c.id, "predicate": c.predicate.source,
                         "threshold": c.threshold}
                        for c in v.domain.entries
                    ],
                    "invariants": [
                        {"id": c.id, "predicate": c.predicate.source,
                         "threshold": c.threshold}
                        for c in v.domain.invariants
                    ],
                    "exits": [
                        {"id": c.id, "predicate": c.predicate.source,
                         "threshold": c.threshold,
                         "authority": authority_json(c.authority)}
                        for c in v.domain.exits
                    ],
                },
            }
            for v in network.vodds
        ],
    }


def load_network(path: str) -> VoddNetwork:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format_version") != 1:
        raise ValidationError("network file must declare format_version 1", path)
    return parse_network(data, where=path)
