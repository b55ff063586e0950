"""Authority transfer: deadline estimation, explanations, the handover loop.

When a deliberating agent meets a conflict it may not resolve on its own, it
estimates how long it can keep holding before a safety-preserving fallback
must begin, sends an explained request to an external authority, and waits.
The wait is expressed against a Clock protocol so the same loop runs under a
simulated world clock, a scripted authority, or a live bridge connection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Protocol, Sequence

from .dynamics import ObservationSpec, TransitionModel, WorldState
from .errors import IncompleteWitness, NoSafeTick
from .game_core import Conflict, Goal, GoalHierarchy, Trace, evaluate_goal
from .vodd import Option

OBSERVED_TEMPLATE = (
    "I attempted manoeuvre {x} to achieve goal {g} in situation {s}, "
    "but {other} did {y}, which prevented me from achieving {x}."
)
ANTICIPATED_TEMPLATE = (
    "I intend to do {x} for {g} in situation {s}, but I believe {other} "
    "sees the situation as {sp}, pursues {gp}, and will do {y}."
)
SITUATION_OMITTED = "(situation omitted)"
NO_ACTION = "nothing"


def render_manoeuvre(actions: Sequence[str]) -> str:
    return " then ".join(actions) if actions else NO_ACTION


def render_situation(items: Sequence[tuple[str, int]]) -> str:
    inner = ", ".join(f"{name}={value}" for name, value in sorted(items))
    return "{" + inner + "}"


@dataclass(frozen=True)
class Explanation:
    mode: str  # "observed" | "anticipated"
    owner: str
    intended: str
    goal: str
    situation: tuple[tuple[str, int], ...]
    other: str
    other_action: str
    other_situation: tuple[tuple[str, int], ...] = ()
    other_goal: str = ""

    def to_json(self, verbose: bool = True) -> dict:
        out = {
            "mode": self.mode,
            "owner": self.owner,
            "intended": self.intended,
            "goal": self.goal,
            "situation": dict(self.situation),
            "other": self.other,
            "other_action": self.other_action,
            "text": render_explanation(self, verbose=verbose),
        }
        if self.mode == "anticipated":
            out["other_situation"] = dict(self.other_situation)
            out["other_goal"] = self.other_goal
        return out


def render_explanation(e: Explanation, verbose: bool = True) -> str:
    s = render_situation(e.situation) if verbose else SITUATION_OMITTED
    if e.mode == "observed":
        return OBSERVED_TEMPLATE.format(
            x=e.intended, g=e.goal, s=s, other=e.other, y=e.other_action
        )
    sp = render_situation(e.other_situation) if verbose else SITUATION_OMITTED
    return ANTICIPATED_TEMPLATE.format(
        x=e.intended,
        g=e.goal,
        s=s,
        other=e.other,
        sp=sp,
        gp=e.other_goal,
        y=e.other_action,
    )


def _first_goal_in(hierarchy: GoalHierarchy, wanted: frozenset) -> Optional[str]:
    for level in hierarchy.levels:
        for gid in level:
            if gid in wanted:
                return gid
    return None


def _pursued_goal(
    owner_hierarchy: GoalHierarchy, at_stake: frozenset
) -> str:
    gid = _first_goal_in(owner_hierarchy, at_stake)
    if gid is not None:
        return gid
    for level in owner_hierarchy.levels:
        for g in level:
            return g
    return "(none)"


def _pick_other(
    conflict: Conflict, owner: str, profile: Mapping[str, Sequence[str]]
) -> str:
    candidates = sorted(conflict.participants - {owner})
    if not candidates:
        return "(nobody)"
    for cid in candidates:
        if cid in profile:
            return cid
    return candidates[0]


def _project(
    state: Mapping[str, int], observation: ObservationSpec
) -> tuple[tuple[str, int], ...]:
    out = {}
    for name, value in state.items():
        if observation.sees(name):
            out[name] = value
        elif name in observation.assumed:
            out[name] = observation.assumed[name]
    return tuple(sorted(out.items()))


def build_anticipated(
    conflict: Conflict,
    owner: str,
    hierarchies: Mapping[str, GoalHierarchy],
    observations: Mapping[str, ObservationSpec],
) -> Explanation:
    """Explanation for a conflict seen coming, from the owner's belief witness."""
    believed = (conflict.witness or {}).get("believed", {})
    w = believed.get(owner)
    if w is None:
        raise IncompleteWitness(f"no belief witness for {owner!r}")
    cx = w.get("counterexample")
    if cx is None:
        raise IncompleteWitness(f"belief witness for {owner!r} has no counterexample")
    profile = cx["profile"]
    other = _pick_other(conflict, owner, profile)
    other_obs = observations.get(other, ObservationSpec())
    other_hierarchy = hierarchies.get(other)
    if other_hierarchy is None:
        other_goal = "(none)"
    else:
        other_goal = _pursued_goal(other_hierarchy, conflict.goals_at_stake)
    return Explanation(
        mode="anticipated",
        owner=owner,
        intended=render_manoeuvre(w["intended"]),
        goal=_pursued_goal(hierarchies[owner], conflict.goals_at_stake),
        situation=tuple(sorted(cx["state"].items())),
        other=other,
        other_action=(
            render_manoeuvre(profile[other]) if other in profile else NO_ACTION
        ),
        other_situation=_project(cx["state"], other_obs),
        other_goal=other_goal,
    )


def build_observed(
    conflict: Conflict,
    owner: str,
    taken: Sequence[str],
    state: Mapping[str, int],
    hierarchies: Mapping[str, GoalHierarchy],
) -> Explanation:
    """Explanation for a conflict that ground truth confirms, post hoc."""
    actual = (conflict.witness or {}).get("actual")
    if actual is None or not actual.get("profiles"):
        raise IncompleteWitness("no ground-truth witness profiles")
    profiles = actual["profiles"]
    chosen = list(taken)
    match = None
    for entry in profiles:
        if entry["actions"].get(owner, chosen) == chosen and entry["unsatisfied"]:
            match = entry
            break
    if match is None:
        match = profiles[0]
    other = _pick_other(conflict, owner, match["actions"])
    return Explanation(
        mode="observed",
        owner=owner,
        intended=render_manoeuvre(taken),
        goal=_pursued_goal(hierarchies[owner], conflict.goals_at_stake),
        situation=tuple(sorted(state.items())),
        other=other,
        other_action=(
            render_manoeuvre(match["actions"][other])
            if other in match["actions"]
            else NO_ACTION
        ),
    )


# ---------------------------------------------------------------------------
# Deadline estimation


def estimate_deadline(
    transition: TransitionModel,
    state: WorldState,
    agent_id: str,
    hold: str,
    fallback: Sequence[str],
    others_first: Mapping[str, str],
    safety_goals: Sequence[Goal],
    horizon: int,
) -> int:
    """Largest number of atomic holds after which the fallback still keeps
    every safety goal satisfied over the whole lookahead.

    Other movers are modelled as playing their first declared action every
    tick. Raises NoSafeTick when even an immediate fallback fails.
    """
    if not fallback:
        raise NoSafeTick(f"agent {agent_id!r} has no fallback manoeuvre")
    for holds in range(horizon, -1, -1):
        plan = [hold] * holds
        i = 0
        while len(plan) < horizon:
            plan.append(fallback[i] if i < len(fallback) else fallback[-1])
            i += 1
        states = [state]
        current = state
        joints = []
        ok = True
        for t in range(horizon):
            joint = dict(others_first)
            joint[agent_id] = plan[t]
            try:
                current = transition.step(current, joint)
            except Exception:
                ok = False
                break
            joints.append(joint)
            states.append(current)
        if not ok:
            continue
        trace = Trace(tuple(states), tuple(tuple(sorted(j.items())) for j in joints))
        if all(evaluate_goal(g, trace) for g in safety_goals):
            return holds
    raise NoSafeTick(
        f"no hold count in [0, {horizon}] keeps the safety goals satisfiable"
    )


# ---------------------------------------------------------------------------
# Requests and the handover loop


@dataclass(frozen=True)
class TransferRequest:
    request_id: int
    tick: int
    deadline_tick: int
    explanation: Explanation
    options: tuple[Option, ...]
    fallback: tuple[str, ...]

    def to_json(self, verbose: bool = True) -> dict:
        return {
            "request_id": self.request_id,
            "tick": self.tick,
            "deadline_tick": self.deadline_tick,
            "explanation": self.explanation.to_json(verbose=verbose),
            "options": [
                {
                    "action": o.action,
                    "sacrifices": sorted(o.sacrifices),
                    "preserves": sorted(o.preserves),
                }
                for o in self.options
            ],
            "fallback": list(self.fallback),
        }


@dataclass(frozen=True)
class Resolution:
    request_id: int
    chosen: str


@dataclass(frozen=True)
class Resolved:
    request_id: int
    chosen: str
    tick: int


@dataclass(frozen=True)
class FallbackExecuted:
    request_id: int
    cause: str  # "timeout" | "invalid_resolution"
    tick: int


TransferOutcome = Resolved | FallbackExecuted


class Clock(Protocol):
    @property
    def tick(self) -> int: ...

    def advance(self) -> None: ...


class AuthorityChannel(Protocol):
    def submit(self, request: TransferRequest) -> None: ...

    def poll(self) -> Optional[Resolution]: ...

    def notify(self, event: dict) -> None: ...


class ScriptedAuthority:
    """Answers requests from a fixed policy after a fixed number of polls.

    choose is "first", "none", or an explicit action id. The reply is
    produced once per submitted request.
    """

    def __init__(self, choose: str = "first", delay: int = 0):
        self.choose = choose
        self.delay = delay
        self._request: Optional[TransferRequest] = None
        self._remaining = 0
        self._answered = False

    def submit(self, request: TransferRequest) -> None:
        self._request = request
        self._remaining = self.delay
        self._answered = False

    def poll(self) -> Optional[Resolution]:
        if self._request is None or self._answered or self.choose == "none":
            return None
        if self._remaining > 0:
            self._remaining -= 1
            return None
        self._answered = True
        if self.choose == "first":
            chosen = (
                self._request.options[0].action if self._request.options else ""
            )
        else:
            chosen = self.choose
        return Resolution(self._request.request_id, chosen)

    def notify(self, event: dict) -> None:
        pass


def initiate_transfer(
    request: TransferRequest, channel: AuthorityChannel, clock: Clock
) -> TransferOutcome:
    """Submit the request and block until resolution or deadline.

    Resolutions with a stale request_id are dropped without costing a tick.
    A resolution naming an action outside the offered options falls back
    immediately. Reaching the deadline with no valid answer falls back.
    """
    channel.submit(request)
    valid = {o.action for o in request.options}
    while True:
        resolution = channel.poll()
        if resolution is not None:
            if resolution.request_id != request.request_id:
                continue
            if resolution.chosen not in valid:
                return FallbackExecuted(
                    request.request_id, "invalid_resolution", clock.tick
                )
            return Resolved(request.request_id, resolution.chosen, clock.tick)
        if clock.tick >= request.deadline_tick:
            return FallbackExecuted(request.request_id, "timeout", clock.tick)
        clock.advance()
