"""World states, transition models, and observation declarations.

States are flat maps from feature names to small integers (positions in
cells, speeds in cells per tick, booleans as 0/1). Two transition model
kinds are supported:

* Table: an explicit total map over declared states and joint actions of
  the acting agents.
* Kinematic1D: integer cell/speed dynamics on a laned strip with static
  obstacles; collision latches once set.

Normative agents never appear among a model's actors, so they cannot
influence the world by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import IllegalAction, ValidationError


@dataclass(frozen=True)
class WorldState:
    """Immutable feature valuation, ordered by feature name."""

    items: tuple[tuple[str, int], ...]
    _map: dict = field(compare=False, repr=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_map", dict(self.items))

    @staticmethod
    def from_mapping(mapping: Mapping[str, int]) -> "WorldState":
        return WorldState(tuple(sorted((str(k), int(v)) for k, v in mapping.items())))

    def __getitem__(self, name: str) -> int:
        return self._map[name]

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def get(self, name: str, default: Optional[int] = None):
        return self._map.get(name, default)

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    def replace(self, **changes: int) -> "WorldState":
        merged = dict(self.items)
        merged.update({k: int(v) for k, v in changes.items()})
        return WorldState.from_mapping(merged)

    def __hash__(self):
        return hash(self.items)


@dataclass(frozen=True)
class FeatureDecl:
    """Declared integer feature with an inclusive range and initial value."""

    name: str
    lo: int
    hi: int
    init: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValidationError(f"empty range [{self.lo}, {self.hi}]", self.name)
        if not (self.lo <= self.init <= self.hi):
            raise ValidationError(
                f"initial value {self.init} outside [{self.lo}, {self.hi}]", self.name
            )

    def values(self) -> range:
        return range(self.lo, self.hi + 1)


JointAction = tuple[tuple[str, str], ...]  # ((agent_id, action_id), ...) sorted


def _joint_key(actions: Mapping[str, str], actors: tuple[str, ...]) -> JointAction:
    return tuple((a, actions[a]) for a in actors)


class TableTransition:
    """Explicit transition table, total over states x actor action combos."""

    kind = "table"

    def __init__(
        self,
        actors: tuple[str, ...],
        rules: Mapping[tuple[WorldState, JointAction], WorldState],
        states: tuple[WorldState, ...],
    ):
        self.actors = actors
        self.rules = dict(rules)
        self.states = states

    def step(self, state: WorldState, actions: Mapping[str, str]) -> WorldState:
        for actor in self.actors:
            if actor not in actions:
                raise IllegalAction(f"no action supplied for actor {actor!r}")
        key = (state, _joint_key(actions, self.actors))
        try:
            return self.rules[key]
        except KeyError:
            raise IllegalAction(
                f"no rule for state {dict(state.items)} with actions "
                f"{ {a: actions[a] for a in self.actors} }"
            ) from None

    def validate_total(self, actions_by_actor: Mapping[str, tuple[str, ...]]) -> None:
        """Every declared state x joint action combination must be covered."""
        import itertools

        for state in self.states:
            for combo in itertools.product(
                *(actions_by_actor[a] for a in self.actors)
            ):
                key = (state, tuple(zip(self.actors, combo)))
                if key not in self.rules:
                    raise ValidationError(
                        f"table not total: state {dict(state.items)} "
                        f"lacks actions {dict(zip(self.actors, combo))}",
                        "transition",
                    )


@dataclass(frozen=True)
class KinematicAgent:
    id: str
    lane: int
    pos_feature: str
    speed_feature: str


class Kinematic1D:
    """Integer 1-D kinematics: speed adjusts by action delta, then position
    advances by the new speed. Hitting an obstacle or sharing a cell on the
    same lane sets the latched collision feature."""

    kind = "kinematic1d"

    def __init__(
        self,
        cells: int,
        max_speed: int,
        agents: tuple[KinematicAgent, ...],
        action_deltas: Mapping[str, int],
        obstacles: tuple[tuple[int, int], ...] = (),  # (lane, cell)
        collision_feature: str = "collision",
    ):
        if cells < 1:
            raise ValidationError("cells must be positive", "transition.cells")
        if max_speed < 0:
            raise ValidationError("max_speed must be >= 0", "transition.max_speed")
        self.cells = cells
        self.max_speed = max_speed
        self.agents = agents
        self.action_deltas = dict(action_deltas)
        self.obstacles = tuple(sorted(obstacles))
        self.collision_feature = collision_feature
        self.actors = tuple(a.id for a in agents)

    def step(self, state: WorldState, actions: Mapping[str, str]) -> WorldState:
        changes: dict[str, int] = {}
        collided = state.get(self.collision_feature, 0) == 1
        placed: dict[tuple[int, int], str] = {}
        for agent in self.agents:
            if agent.id not in actions:
                raise IllegalAction(f"no action supplied for actor {agent.id!r}")
            action = actions[agent.id]
            if action not in self.action_deltas:
                raise IllegalAction(
                    f"action {action!r} of agent {agent.id!r} has no speed delta"
                )
            speed = state[agent.speed_feature] + self.action_deltas[action]
            speed = max(0, min(self.max_speed, speed))
            pos = state[agent.pos_feature]
            target = pos + speed
            for lane, cell in self.obstacles:
                if lane == agent.lane and pos < cell <= target:
                    target = cell
                    collided = True
                    break
            target = min(target, self.cells - 1)
            changes[agent.speed_feature] = speed
            changes[agent.pos_feature] = target
            slot = (agent.lane, target)
            if slot in placed:
                collided = True
            placed[slot] = agent.id
        changes[self.collision_feature] = 1 if collided else 0
        return state.replace(**changes)


TransitionModel = TableTransition | Kinematic1D


@dataclass(frozen=True)
class ObservationSpec:
    """What an agent can see.

    visible: feature names the agent observes (None means everything).
    confusion: per feature, true value -> distribution over observed values.
    assumed: values an agent assumes for features it cannot see; features
    absent here fall back to the scenario's declared initial values.
    """

    visible: Optional[frozenset[str]] = None
    confusion: Mapping[str, Mapping[int, Mapping[int, float]]] = field(
        default_factory=dict
    )
    assumed: Mapping[str, int] = field(default_factory=dict)

    def sees(self, feature: str) -> bool:
        return self.visible is None or feature in self.visible

    def validate(self, features: Mapping[str, FeatureDecl]) -> None:
        if self.visible is not None:
            for name in self.visible:
                if name not in features:
                    raise ValidationError(f"unknown feature {name!r}", "observation.visible")
        for name, table in self.confusion.items():
            if name not in features:
                raise ValidationError(f"unknown feature {name!r}", "observation.confusion")
            for true_value, dist in table.items():
                total = sum(dist.values())
                if abs(total - 1.0) > 1e-9:
                    raise ValidationError(
                        f"confusion row for {name}={true_value} sums to {total}",
                        "observation.confusion",
                    )
                if any(p < 0 for p in dist.values()):
                    raise ValidationError(
                        f"negative probability in confusion row {name}={true_value}",
                        "observation.confusion",
                    )
