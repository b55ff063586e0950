"""Goal satisfaction, strategy dominance, and conflict detection.

The model is epistemic and two-layered:

* A *believed* conflict exists for an agent when, over its believed state
  support and believed opponent strategy sets, no available strategy weakly
  dominates every alternative. Satisfaction of prioritised goals is compared
  with a level-lexicographic Pareto order, so "better" means better on the
  first priority level where outcomes differ at all.
* An *actual* conflict exists when no joint strategy profile satisfies the
  union of every participant's goals under ground truth.

Both detections quantify robustly: a strategy only counts as better if it is
at least as good against every believed contingency. Normative agents own
goals but no influence on the world; their goal hierarchies are merged
level-wise into each deliberating agent's own hierarchy, so internalised
values enter decision difficulty without granting the value bearer any
moves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence

from .dynamics import TransitionModel, WorldState
from .errors import (
    EmptyActionSet,
    SearchBudgetExceeded,
    ValidationError,
)
from .expr import Predicate

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Scenario

DEFAULT_BUDGET = 1_000_000

AgentId = str
ActionId = str
GoalId = str


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Trace:
    """A rollout: horizon+1 states and the joint action taken at each step."""

    states: tuple[WorldState, ...]
    joint_actions: tuple[tuple[tuple[AgentId, ActionId], ...], ...]

    def __post_init__(self):
        if len(self.states) != len(self.joint_actions) + 1:
            raise ValidationError("trace needs one more state than joint actions")

    def validate(self, transition: TransitionModel) -> None:
        for k, joint in enumerate(self.joint_actions):
            nxt = transition.step(self.states[k], dict(joint))
            if nxt != self.states[k + 1]:
                raise ValidationError(f"trace step {k} does not match the transition")


@dataclass(frozen=True)
class Goal:
    """A temporal goal over a trace.

    kind is one of "always", "eventually", "fraction". Fraction goals hold
    when the predicate is satisfied in strictly more than q of the evaluated
    states; q is exact rational arithmetic, no float rounding at the
    boundary. horizon_bound restricts evaluation to states[0..bound].
    """

    id: GoalId
    kind: str
    predicate: Predicate
    horizon_bound: Optional[int] = None
    q: Optional[Fraction] = None

    def __post_init__(self):
        if self.kind not in ("always", "eventually", "fraction"):
            raise ValidationError(f"unknown goal kind {self.kind!r}", self.id)
        if self.kind == "fraction":
            if self.q is None or not (0 < self.q <= 1):
                raise ValidationError("fraction goals need q in (0, 1]", self.id)
        elif self.q is not None:
            raise ValidationError("q only applies to fraction goals", self.id)
        if self.horizon_bound is not None and self.horizon_bound < 0:
            raise ValidationError("horizon_bound must be >= 0", self.id)


@dataclass(frozen=True)
class GoalHierarchy:
    """Priority levels, highest first; goals within a level are incomparable."""

    levels: tuple[tuple[GoalId, ...], ...]

    def __post_init__(self):
        seen: set[GoalId] = set()
        for level in self.levels:
            if not level:
                raise ValidationError("hierarchy level must not be empty")
            for gid in level:
                if gid in seen:
                    raise ValidationError(f"goal {gid!r} appears twice in hierarchy")
                seen.add(gid)

    def goal_ids(self) -> tuple[GoalId, ...]:
        return tuple(g for level in self.levels for g in level)


@dataclass(frozen=True)
class SatisfactionVector:
    """Per-level satisfaction bits, aligned with a hierarchy's levels."""

    levels: tuple[tuple[bool, ...], ...]


class Ordering(Enum):
    DOMINATES = "dominates"
    DOMINATED_BY = "dominated_by"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def compare_vectors(v: SatisfactionVector, w: SatisfactionVector) -> Ordering:
    """Level-lexicographic Pareto order.

    Scan levels highest-first; at the first level whose bitvectors differ,
    pointwise comparison there decides. Pointwise incomparability at that
    level makes the vectors incomparable.
    """
    if len(v.levels) != len(w.levels):
        raise ValidationError("satisfaction vectors have different shapes")
    for vl, wl in zip(v.levels, w.levels):
        if len(vl) != len(wl):
            raise ValidationError("satisfaction vectors have different shapes")
        if vl == wl:
            continue
        v_ge = all(a >= b for a, b in zip(vl, wl))
        w_ge = all(b >= a for a, b in zip(vl, wl))
        if v_ge:
            return Ordering.DOMINATES
        if w_ge:
            return Ordering.DOMINATED_BY
        return Ordering.INCOMPARABLE
    return Ordering.EQUAL


@dataclass(frozen=True)
class Strategy:
    """Open loop: a fixed action sequence, one action per tick."""

    actions: tuple[ActionId, ...]

    def __post_init__(self):
        if not self.actions:
            raise ValidationError("empty strategy")


@dataclass(frozen=True)
class BeliefState:
    """Weighted support over world states plus believed opponent strategies.

    opponent_strategies maps an opponent id to the strategy set the owner
    believes possible for it; an absent id means every strategy is possible.
    """

    support: tuple[tuple[WorldState, float], ...]
    opponent_strategies: Mapping[AgentId, tuple[Strategy, ...]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        if not self.support:
            raise ValidationError("belief support must not be empty")
        total = 0.0
        seen: set[WorldState] = set()
        for state, mass in self.support:
            if mass <= 0:
                raise ValidationError("belief masses must be positive")
            if state in seen:
                raise ValidationError("duplicate state in belief support")
            seen.add(state)
            total += mass
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"belief masses sum to {total}, expected 1")
        for strategies in self.opponent_strategies.values():
            if not strategies:
                raise ValidationError("pinned opponent strategy set must not be empty")

    def states(self) -> tuple[WorldState, ...]:
        return tuple(s for s, _ in self.support)


@dataclass(frozen=True)
class AgentModel:
    id: AgentId
    actions: tuple[ActionId, ...]
    goals: tuple[Goal, ...]
    hierarchy: GoalHierarchy
    belief: Optional[BeliefState] = None
    normative: bool = False

    def __post_init__(self):
        if not self.actions:
            raise EmptyActionSet(f"agent {self.id!r} has no actions")
        if len(set(self.actions)) != len(self.actions):
            raise ValidationError(f"agent {self.id!r} declares duplicate actions")
        by_id = {g.id for g in self.goals}
        if len(by_id) != len(self.goals):
            raise ValidationError(f"agent {self.id!r} declares duplicate goal ids")
        for gid in self.hierarchy.goal_ids():
            if gid not in by_id:
                raise ValidationError(
                    f"agent {self.id!r} hierarchy references unknown goal {gid!r}"
                )

    def goal_map(self) -> dict[GoalId, Goal]:
        return {g.id: g for g in self.goals}


@dataclass(frozen=True)
class StrategicFrame:
    """One dominance analysis: whose decision, over which world and window."""

    owner: AgentId
    agents: tuple[AgentModel, ...]
    transition: TransitionModel
    horizon: int
    evaluation_states: tuple[WorldState, ...]

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("frame horizon must be >= 1")
        if not self.evaluation_states:
            raise ValidationError("frame needs at least one evaluation state")
        if self.owner not in {a.id for a in self.agents}:
            raise ValidationError(f"owner {self.owner!r} is not among the agents")

    def agent(self, agent_id: AgentId) -> AgentModel:
        for a in self.agents:
            if a.id == agent_id:
                return a
        raise ValidationError(f"unknown agent {agent_id!r}")


CONFLICT_KINDS = ("ActualAndBelieved", "BelievedOnly", "ActualOnly")


@dataclass(frozen=True)
class Conflict:
    kind: str
    participants: frozenset[AgentId]
    goals_at_stake: frozenset[GoalId]
    witness: Mapping
    detected_at: int = 0

    def __post_init__(self):
        if self.kind not in CONFLICT_KINDS:
            raise ValidationError(f"unknown conflict kind {self.kind!r}")
        if not self.participants:
            raise ValidationError("conflict needs at least one participant")


# ---------------------------------------------------------------------------
# Goal and profile evaluation


def evaluate_goal(goal: Goal, trace: Trace) -> bool:
    states = trace.states
    if goal.horizon_bound is not None:
        states = states[: goal.horizon_bound + 1]
    values = [goal.predicate.evaluate(s.as_dict()) for s in states]
    if goal.kind == "always":
        return all(values)
    if goal.kind == "eventually":
        return any(values)
    # fraction: strictly more than q of the evaluated states, exact arithmetic
    hits = sum(1 for v in values if v)
    return Fraction(hits, len(values)) > goal.q


def satisfaction_vector(
    hierarchy: GoalHierarchy, goals: Mapping[GoalId, Goal], trace: Trace
) -> SatisfactionVector:
    return SatisfactionVector(
        tuple(
            tuple(evaluate_goal(goals[gid], trace) for gid in level)
            for level in hierarchy.levels
        )
    )


def all_strategies(agent: AgentModel, horizon: int) -> list[Strategy]:
    """Every open-loop strategy, in canonical (declaration-order) order."""
    return [
        Strategy(seq) for seq in itertools.product(agent.actions, repeat=horizon)
    ]


def canonical_key(agent: AgentModel, strategy: Strategy) -> tuple[int, ...]:
    index = {a: i for i, a in enumerate(agent.actions)}
    return tuple(index[a] for a in strategy.actions)


def rollout(
    transition: TransitionModel,
    start: WorldState,
    profile: Mapping[AgentId, Strategy],
    horizon: int,
) -> Trace:
    states = [start]
    joints = []
    actors = transition.actors
    for t in range(horizon):
        joint = {a: profile[a].actions[t] for a in actors}
        states.append(transition.step(states[-1], joint))
        joints.append(tuple(sorted(joint.items())))
    return Trace(tuple(states), tuple(joints))


def evaluate_profile(
    frame: StrategicFrame,
    profile: Mapping[AgentId, Strategy],
    start: WorldState,
) -> dict[AgentId, SatisfactionVector]:
    """Roll the world forward and score every agent against its own goals."""
    trace = rollout(frame.transition, start, profile, frame.horizon)
    return {
        agent.id: satisfaction_vector(agent.hierarchy, agent.goal_map(), trace)
        for agent in frame.agents
    }


def effective_hierarchy(
    frame: StrategicFrame, agent: AgentModel
) -> tuple[GoalHierarchy, dict[GoalId, Goal]]:
    """The agent's hierarchy with normative agents' goals merged level-wise.

    Value bearers cannot act, but the values they embody weigh on the
    deliberating agent's decision at the matching priority level.
    """
    merged: list[list[GoalId]] = [list(level) for level in agent.hierarchy.levels]
    goals = agent.goal_map()
    for other in frame.agents:
        if not other.normative or other.id == agent.id:
            continue
        for i, level in enumerate(other.hierarchy.levels):
            if i >= len(merged):
                merged.append([])
            merged[i].extend(level)
        goals.update(other.goal_map())
    return GoalHierarchy(tuple(tuple(level) for level in merged if level)), goals


def _believed_sets(
    frame: StrategicFrame, agent: AgentModel
) -> list[tuple[AgentId, list[Strategy]]]:
    """Believed strategy sets for each non-normative opponent, in frame order."""
    pins = agent.belief.opponent_strategies if agent.belief else {}
    out = []
    for other in frame.agents:
        if other.id == agent.id or other.normative:
            continue
        pinned = pins.get(other.id)
        out.append((other.id, list(pinned) if pinned else all_strategies(other, frame.horizon)))
    return out


def _contexts(
    frame: StrategicFrame, agent: AgentModel
) -> list[tuple[dict[AgentId, Strategy], WorldState]]:
    """Every (opponent profile, evaluation state) pair, deterministic order."""
    sets = _believed_sets(frame, agent)
    ids = [i for i, _ in sets]
    out = []
    for combo in itertools.product(*(s for _, s in sets)):
        profile = dict(zip(ids, combo))
        for state in frame.evaluation_states:
            out.append((profile, state))
    return out


# Strategies for normative agents never reach the transition model; dynamics
# key on actor ids only. A profile therefore covers non-normative agents.


class _VectorCache:
    def __init__(self, frame: StrategicFrame, agent: AgentModel):
        self.frame = frame
        self.agent = agent
        self.hierarchy, self.goals = effective_hierarchy(frame, agent)
        self.contexts = _contexts(frame, agent)
        self._cache: dict[Strategy, list[SatisfactionVector]] = {}

    def vectors(self, strategy: Strategy) -> list[SatisfactionVector]:
        found = self._cache.get(strategy)
        if found is not None:
            return found
        trace_vectors = []
        for profile, state in self.contexts:
            full = dict(profile)
            full[self.agent.id] = strategy
            trace = rollout(self.frame.transition, state, full, self.frame.horizon)
            trace_vectors.append(
                satisfaction_vector(self.hierarchy, self.goals, trace)
            )
        self._cache[strategy] = trace_vectors
        return trace_vectors


def _aggregate(
    v1: Sequence[SatisfactionVector], v2: Sequence[SatisfactionVector]
) -> Ordering:
    any_dom = False
    any_sub = False
    for a, b in zip(v1, v2):
        order = compare_vectors(a, b)
        if order is Ordering.INCOMPARABLE:
            return Ordering.INCOMPARABLE
        if order is Ordering.DOMINATES:
            any_dom = True
        elif order is Ordering.DOMINATED_BY:
            any_sub = True
        if any_dom and any_sub:
            return Ordering.INCOMPARABLE
    if any_dom:
        return Ordering.DOMINATES
    if any_sub:
        return Ordering.DOMINATED_BY
    return Ordering.EQUAL


def compare_strategies(
    frame: StrategicFrame, agent_id: AgentId, s1: Strategy, s2: Strategy
) -> Ordering:
    """Robust comparison over every believed contingency.

    s1 dominates s2 when it is at least as good in every (opponent profile,
    evaluation state) pair and strictly better in at least one.
    """
    agent = frame.agent(agent_id)
    cache = _VectorCache(frame, agent)
    return _aggregate(cache.vectors(s1), cache.vectors(s2))


def _search_size(frame: StrategicFrame, agent: AgentModel) -> int:
    n = len(agent.actions) ** frame.horizon
    for _, strategies in _believed_sets(frame, agent):
        n *= len(strategies)
    return n * len(frame.evaluation_states)


def has_dominant_strategy(
    frame: StrategicFrame, agent_id: AgentId, budget: int = DEFAULT_BUDGET
) -> Optional[Strategy]:
    """The canonically least weakly dominant strategy, or None.

    A strategy qualifies when no alternative beats it anywhere: against each
    alternative it compares Dominates or Equal. Ties return the least
    strategy under the canonical order (action ids in declaration order).
    """
    agent = frame.agent(agent_id)
    needed = _search_size(frame, agent)
    if needed > budget:
        raise SearchBudgetExceeded(needed, budget)
    cache = _VectorCache(frame, agent)
    strategies = all_strategies(agent, frame.horizon)
    # A strategy is weakly dominant iff at every context its vector is >=
    # every other strategy's vector there; filter candidates context by
    # context against the distinct vectors seen at that context.
    per_strategy = [cache.vectors(s) for s in strategies]
    candidates = list(range(len(strategies)))
    for ctx in range(len(cache.contexts)):
        distinct = list({per_strategy[i][ctx] for i in range(len(strategies))})
        if len(distinct) == 1:
            continue
        survivors = []
        for i in candidates:
            mine = per_strategy[i][ctx]
            ok = True
            for other in distinct:
                if other == mine:
                    continue
                if compare_vectors(mine, other) not in (
                    Ordering.DOMINATES,
                    Ordering.EQUAL,
                ):
                    ok = False
                    break
            if ok:
                survivors.append(i)
        candidates = survivors
        if not candidates:
            return None
    return strategies[candidates[0]] if candidates else None


# ---------------------------------------------------------------------------
# Conflict detection


def _least_maximal(
    cache: _VectorCache, strategies: list[Strategy]
) -> int:
    """Index of the canonically least strategy not dominated by any other."""
    per = [cache.vectors(s) for s in strategies]
    for i in range(len(strategies)):
        dominated = False
        for j in range(len(strategies)):
            if i == j:
                continue
            if _aggregate(per[j], per[i]) is Ordering.DOMINATES:
                dominated = True
                break
        if not dominated:
            return i
    return 0  # unreachable: a finite partial order has maximal elements


def maximal_consequences(
    frame: StrategicFrame,
    agent_id: AgentId,
    goal_ids: frozenset[GoalId],
    budget: int = DEFAULT_BUDGET,
) -> list[tuple[Strategy, frozenset[GoalId]]]:
    """Undominated strategies with the goals each gives up somewhere.

    For every strategy not beaten by another, pair it with the subset of
    goal_ids that fails in at least one believed context when the agent
    plays it. Ids outside the agent's effective hierarchy cannot be
    evaluated and are treated as never failing. Canonical strategy order.
    """
    agent = frame.agent(agent_id)
    needed = _search_size(frame, agent)
    if needed > budget:
        raise SearchBudgetExceeded(needed, budget)
    cache = _VectorCache(frame, agent)
    strategies = all_strategies(agent, frame.horizon)
    per = [cache.vectors(s) for s in strategies]
    flat_ids = cache.hierarchy.goal_ids()
    slots = {gid: flat_ids.index(gid) for gid in goal_ids if gid in flat_ids}
    out = []
    for i, s in enumerate(strategies):
        if any(
            _aggregate(per[j], per[i]) is Ordering.DOMINATES
            for j in range(len(strategies))
            if j != i
        ):
            continue
        failed = set()
        for vec in per[i]:
            bits = tuple(b for level in vec.levels for b in level)
            for gid, slot in slots.items():
                if not bits[slot]:
                    failed.add(gid)
        out.append((s, frozenset(failed)))
    return out


_WITNESS_TABLE_LIMIT = 12


def _believed_witness(
    frame: StrategicFrame,
    agent: AgentModel,
    cache: _VectorCache,
    at_stake: list[GoalId],
) -> dict:
    strategies = all_strategies(agent, frame.horizon)
    intended_index = _least_maximal(cache, strategies)
    intended = strategies[intended_index]
    counterexample = None
    # first context where a highest-priority at-stake goal fails the
    # intended strategy, scanning the effective hierarchy top down
    ordered_stake = [
        gid for level in cache.hierarchy.levels for gid in level if gid in at_stake
    ]
    vectors = cache.vectors(intended)
    flat_ids = cache.hierarchy.goal_ids()
    for gid in ordered_stake:
        slot = flat_ids.index(gid)
        for ctx_index, (profile, state) in enumerate(cache.contexts):
            bits = tuple(b for level in vectors[ctx_index].levels for b in level)
            if not bits[slot]:
                counterexample = {
                    "profile": {
                        a: list(s.actions) for a, s in sorted(profile.items())
                    },
                    "state": state.as_dict(),
                    "goal": gid,
                }
                break
        if counterexample:
            break
    witness: dict = {
        "owner": agent.id,
        "strategy_count": len(strategies),
        "intended": list(intended.actions),
        "counterexample": counterexample,
    }
    if len(strategies) <= _WITNESS_TABLE_LIMIT:
        table = []
        for i, s1 in enumerate(strategies):
            for j, s2 in enumerate(strategies):
                if i >= j:
                    continue
                order = _aggregate(cache.vectors(s1), cache.vectors(s2))
                table.append(
                    {
                        "s1": list(s1.actions),
                        "s2": list(s2.actions),
                        "order": order.value,
                    }
                )
        witness["comparisons"] = table
    return witness


def detect_believed_conflict(
    agent_id: AgentId,
    frame: StrategicFrame,
    budget: int = DEFAULT_BUDGET,
    detected_at: int = 0,
) -> Optional[Conflict]:
    """No weakly dominant strategy under the agent's beliefs means conflict."""
    agent = frame.agent(agent_id)
    if has_dominant_strategy(frame, agent_id, budget) is not None:
        return None
    cache = _VectorCache(frame, agent)
    strategies = all_strategies(agent, frame.horizon)
    # goals whose satisfaction varies across strategies and contexts are what
    # make the decision hard
    flat_ids = cache.hierarchy.goal_ids()
    seen_bits: list[set[bool]] = [set() for _ in flat_ids]
    for s in strategies:
        for vec in cache.vectors(s):
            for slot, bit in enumerate(
                b for level in vec.levels for b in level
            ):
                seen_bits[slot].add(bit)
    at_stake = [gid for gid, bits in zip(flat_ids, seen_bits) if len(bits) > 1]
    owners: set[AgentId] = {agent.id}
    for other in frame.agents:
        if other.id == agent.id:
            continue
        if other.normative:
            if any(g in at_stake for g in other.hierarchy.goal_ids()):
                owners.add(other.id)
        else:
            owners.add(other.id)
    witness = _believed_witness(frame, agent, cache, at_stake)
    return Conflict(
        kind="BelievedOnly",
        participants=frozenset(owners),
        goals_at_stake=frozenset(at_stake),
        witness={"believed": {agent.id: witness}},
        detected_at=detected_at,
    )


_ACTUAL_WITNESS_LIMIT = 256


def detect_actual_conflict(
    ground_truth: WorldState,
    agents: Sequence[AgentModel],
    transition: TransitionModel,
    horizon: int,
    budget: int = DEFAULT_BUDGET,
    detected_at: int = 0,
) -> Optional[Conflict]:
    """Conflict iff no joint profile satisfies every agent's goals at once.

    Normative agents' goals count even though they have no moves; that is
    how value bearers participate in conflicts.
    """
    movers = [a for a in agents if not a.normative]
    needed = 1
    for a in movers:
        needed *= len(a.actions) ** horizon
    if needed > budget:
        raise SearchBudgetExceeded(needed, budget)
    goal_owner: dict[GoalId, AgentId] = {}
    for a in agents:
        for gid in a.hierarchy.goal_ids():
            goal_owner[gid] = a.id
    profile_rows = []
    union_unsat: set[GoalId] = set()
    spaces = [all_strategies(a, horizon) for a in movers]
    frame_agents = tuple(agents)
    for combo in itertools.product(*spaces):
        profile = {a.id: s for a, s in zip(movers, combo)}
        trace = rollout(transition, ground_truth, profile, horizon)
        unsat: dict[AgentId, list[GoalId]] = {}
        for a in frame_agents:
            misses = [
                g.id
                for g in a.goals
                if g.id in goal_owner and not evaluate_goal(g, trace)
            ]
            if misses:
                unsat[a.id] = misses
        if not unsat:
            return None  # a joint solution exists
        union_unsat.update(g for misses in unsat.values() for g in misses)
        if len(profile_rows) < _ACTUAL_WITNESS_LIMIT:
            profile_rows.append(
                {
                    "actions": {a: list(s.actions) for a, s in sorted(profile.items())},
                    "unsatisfied": {k: sorted(v) for k, v in sorted(unsat.items())},
                }
            )
    participants = frozenset(goal_owner[g] for g in union_unsat)
    witness = {
        "actual": {
            "profiles": profile_rows,
            "profile_count": needed,
            "truncated": needed > _ACTUAL_WITNESS_LIMIT,
        }
    }
    return Conflict(
        kind="ActualOnly",
        participants=participants,
        goals_at_stake=frozenset(union_unsat),
        witness=witness,
        detected_at=detected_at,
    )


def classify_conflict(
    believed: Optional[Conflict], actual: Optional[Conflict]
) -> Optional[Conflict]:
    """Merge per-layer detections into one classified conflict.

    Pure: no state is read or written, identical inputs give identical
    results.
    """
    if believed is None and actual is None:
        return None
    if believed is not None and actual is not None:
        return Conflict(
            kind="ActualAndBelieved",
            participants=believed.participants | actual.participants,
            goals_at_stake=believed.goals_at_stake | actual.goals_at_stake,
            witness={
                "believed": believed.witness.get("believed"),
                "actual": actual.witness.get("actual"),
            },
            detected_at=actual.detected_at,
        )
    if believed is not None:
        return believed
    return actual


def merge_believed(conflicts: Sequence[Conflict]) -> Optional[Conflict]:
    """Union several agents' believed conflicts detected at the same tick."""
    live = [c for c in conflicts if c is not None]
    if not live:
        return None
    by_owner: dict[AgentId, Mapping] = {}
    participants: frozenset[AgentId] = frozenset()
    goals: frozenset[GoalId] = frozenset()
    for c in live:
        participants |= c.participants
        goals |= c.goals_at_stake
        by_owner.update(c.witness.get("believed", {}))
    return Conflict(
        kind="BelievedOnly",
        participants=participants,
        goals_at_stake=goals,
        witness={"believed": by_owner},
        detected_at=live[0].detected_at,
    )


# ---------------------------------------------------------------------------
# Capability adjustments


@dataclass(frozen=True)
class BeliefAdjustment:
    """Change what an agent can see or believes others may do."""

    agent: AgentId
    unmask: tuple[str, ...] = ()
    mask: tuple[str, ...] = ()
    pin_opponent: Optional[Mapping[AgentId, tuple[tuple[ActionId, ...], ...]]] = None
    clear_pins: bool = False


@dataclass(frozen=True)
class BehaviourAdjustment:
    """Add or remove actions from an agent's repertoire."""

    agent: AgentId
    add: tuple[ActionId, ...] = ()
    remove: tuple[ActionId, ...] = ()


_UNSET = object()


@dataclass(frozen=True)
class GoalAdjustment:
    """Replace parts of one goal: kind, predicate, bound, q, or level."""

    agent: AgentId
    goal: GoalId
    kind: Optional[str] = None
    predicate: Optional[str] = None
    horizon_bound: object = _UNSET
    q: Optional[Fraction] = None
    level: Optional[int] = None


Adjustment = BeliefAdjustment | BehaviourAdjustment | GoalAdjustment

_DIMENSIONS = {
    "beliefs": BeliefAdjustment,
    "behaviours": BehaviourAdjustment,
    "goals": GoalAdjustment,
}


def apply_adjustment(
    scenario: "Scenario", dimension: str, adjustment: Adjustment
) -> "Scenario":
    """Return an adjusted copy of the scenario; the original is untouched."""
    from . import scenario as scenario_mod

    expected = _DIMENSIONS.get(dimension)
    if expected is None:
        raise ValidationError(f"unknown adjustment dimension {dimension!r}")
    if not isinstance(adjustment, expected):
        raise ValidationError(
            f"{dimension} adjustment must be a {expected.__name__}"
        )
    return scenario_mod.adjusted(scenario, adjustment)
