"""The closed loop: sense, consult the domain engine, deliberate, act, log.

Each tick the deliberating agent senses (beliefs come from its observation
spec plus any injected distributions), the domain engine is consulted, a
fresh strategic frame is built over the constant lookahead window, and
conflicts are detected from the agent's perspective alongside a ground
truth check. Conflicts the agent may settle itself are resolved in scope;
the rest go to the authority channel, during which the world keeps moving
with the agent holding. A resolved episode is remembered so the same
conflict does not re-trigger a request every tick. Once a fallback engages
it runs to the end of the run.

Run logs are JSONL with canonical serialization, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from . import vodd as vodd_mod
from .dynamics import WorldState
from .errors import IncompleteWitness, NoSafeTick, ValidationError
from .game_core import (
    DEFAULT_BUDGET,
    AgentModel,
    BeliefState,
    Conflict,
    StrategicFrame,
    classify_conflict,
    detect_actual_conflict,
    detect_believed_conflict,
    has_dominant_strategy,
)
from .scenario import AgentSpec, BeliefInjection, MonitorSpec, Scenario
from .transfer import (
    AuthorityChannel,
    FallbackExecuted,
    Resolved,
    ScriptedAuthority,
    TransferRequest,
    build_anticipated,
    build_observed,
    estimate_deadline,
    initiate_transfer,
    render_explanation,
)

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Sensing


def sense(
    scenario: Scenario,
    spec: AgentSpec,
    state: WorldState,
    rng: random.Random,
    injections: Sequence[BeliefInjection] = (),
) -> BeliefState:
    """One observation pass for one agent.

    Visible features report their true value, except where a confusion
    table is declared: there the observed value is sampled and the belief
    becomes the posterior over the feature's declared values under a
    uniform prior. Hidden features take the agent's assumed value (the
    scenario's initial value when none is declared). An injected
    distribution replaces whatever sensing would have produced for that
    feature. Sampling here is the only randomness in a run.
    """
    injected = {inj.feature: inj.distribution for inj in injections}
    marginals: list[list[tuple[int, float]]] = []
    names: list[str] = []
    for name, decl in scenario.features.items():
        names.append(name)
        if name in injected:
            marginals.append([(v, p) for v, p in injected[name] if p > 0])
            continue
        obs = spec.observation
        if not obs.sees(name):
            marginals.append([(obs.assumed.get(name, decl.init), 1.0)])
            continue
        table = obs.confusion.get(name)
        if not table:
            marginals.append([(state[name], 1.0)])
            continue
        true_value = state[name]
        row = table.get(true_value)
        if row:
            u = rng.random()
            observed = None
            acc = 0.0
            for value, p in sorted(row.items()):
                acc += p
                if u < acc:
                    observed = value
                    break
            if observed is None:
                observed = max(row)
        else:
            observed = true_value
        posterior = []
        for candidate in decl.values():
            crow = table.get(candidate)
            like = (
                crow.get(observed, 0.0)
                if crow is not None
                else (1.0 if candidate == observed else 0.0)
            )
            if like > 0:
                posterior.append((candidate, like))
        total = sum(p for _, p in posterior)
        marginals.append([(v, p / total) for v, p in posterior])
    support = []
    for combo in itertools.product(*marginals):
        mass = 1.0
        for _, p in combo:
            mass *= p
        support.append(
            (
                WorldState.from_mapping(
                    {n: v for n, (v, _) in zip(names, combo)}
                ),
                mass,
            )
        )
    return BeliefState(support=tuple(support))


def build_frame(
    scenario: Scenario, agent_id: str, beliefs: Mapping[str, BeliefState]
) -> StrategicFrame:
    agents = scenario.build_agents(beliefs)
    belief = beliefs[agent_id]
    return StrategicFrame(
        owner=agent_id,
        agents=agents,
        transition=scenario.transition,
        horizon=scenario.horizon,
        evaluation_states=tuple(s for s, _ in belief.support),
    )


# ---------------------------------------------------------------------------
# Pattern monitors


class PatternMonitor:
    """Counts how often a goal's predicate held, weighted by step or by
    movement of a distance feature, skipping ticks whose resolution
    knowingly sacrificed the goal. Passes iff the ratio strictly exceeds q.
    """

    def __init__(self, spec: MonitorSpec, goals):
        self.spec = spec
        self.goal = goals[spec.goal]
        self.num = 0
        self.den = 0

    def observe(
        self, pre: WorldState, post: WorldState, sacrificed: frozenset
    ) -> None:
        if self.spec.measure == "distance":
            weight = abs(post[self.spec.distance_feature] - pre[self.spec.distance_feature])
        else:
            weight = 1
        self.den += weight
        if self.goal.predicate.evaluate(post.as_dict()) and self.spec.goal not in sacrificed:
            self.num += weight

    def passed(self) -> bool:
        return self.den > 0 and Fraction(self.num, self.den) > self.spec.q

    def result(self) -> dict:
        return {
            "goal": self.spec.goal,
            "measure": self.spec.measure,
            "num": self.num,
            "den": self.den,
            "ratio": str(Fraction(self.num, self.den)) if self.den else None,
            "q": str(self.spec.q),
            "pass": self.passed(),
        }


# ---------------------------------------------------------------------------
# Run log plumbing


def canonical_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def tick_digest(record: dict) -> str:
    return hashlib.sha256(canonical_line(record).encode("utf-8")).hexdigest()


def write_log(lines: Sequence[dict], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in lines:
            fh.write(canonical_line(record))
            fh.write("\n")


def load_log(path: str) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValidationError(
                    f"bad log line {lineno}: {exc.msg}", path
                ) from None
    return out


def _conflict_json(c: Conflict) -> dict:
    return {
        "kind": c.kind,
        "participants": sorted(c.participants),
        "goals_at_stake": sorted(c.goals_at_stake),
        "detected_at": c.detected_at,
    }


@dataclass
class RunResult:
    lines: list[dict]
    tick_digests: list[dict]
    conflicts: list[Conflict]
    kb_entries: list[dict]
    monitors: dict[str, dict]
    final_state: WorldState
    transfers: list[dict]
    fallback_engaged: bool
    ticks_run: int


# ---------------------------------------------------------------------------
# The simulation


class _SimClock:
    def __init__(self, sim: "Simulation"):
        self._sim = sim

    @property
    def tick(self) -> int:
        return self._sim.tick

    def advance(self) -> None:
        self._sim._handover_tick()


class Simulation:
    """One seeded run of a scenario.

    The deliberating agent named by scenario.ata follows the full loop; its
    declared policy field is ignored. Other agents follow their policy:
    scripted agents index their script by absolute tick and repeat the last
    entry, holding agents repeat their hold action, and planning agents play
    the first action of a dominant strategy when they have one and hold
    otherwise.
    """

    def __init__(
        self,
        scenario: Scenario,
        seed: int = 0,
        ticks: int = 10,
        budget: int = DEFAULT_BUDGET,
        channel: Optional[AuthorityChannel] = None,
        verbose: bool = True,
    ):
        if ticks < 1:
            raise ValidationError("a run needs at least one tick")
        self.scenario = scenario
        self.seed = seed
        self.ticks = ticks
        self.budget = budget
        self.verbose = verbose
        self.rng = random.Random(seed)
        self.state = scenario.initial_state()
        self.tick = 0
        self.engine = (
            vodd_mod.EngineState(scenario.vodd_network.initial)
            if scenario.vodd_network
            else None
        )
        if channel is not None:
            self.channel = channel
        elif scenario.authority is not None:
            self.channel = ScriptedAuthority(
                scenario.authority.choose, scenario.authority.delay
            )
        else:
            self.channel = ScriptedAuthority("none")
        self._clock = _SimClock(self)
        self._truth_agents = scenario.build_agents(None)
        self._hierarchies = {a.id: a.hierarchy for a in scenario.agents}
        self._observations = {a.id: a.observation for a in scenario.agents}
        self._goals = scenario.all_goals()
        self._safety = [self._goals[g] for g in scenario.safety_goals]
        self.monitors = [PatternMonitor(m, self._goals) for m in scenario.monitors]
        self.lines: list[dict] = [
            {
                "record": "header",
                "format_version": FORMAT_VERSION,
                "scenario": scenario.name,
                "scenario_path": scenario.source_path,
                "scenario_digest": scenario.digest,
                "seed": seed,
                "ticks": ticks,
                "verbose": verbose,
            },
            {
                "record": "init",
                "state": scenario.initial_state().as_dict(),
                "active_vodd": self.engine.active if self.engine else None,
            },
        ]
        self.tick_digests: list[dict] = []
        self.conflicts: list[Conflict] = []
        self.kb_entries: list[dict] = []
        self.transfers: list[dict] = []
        self.standing: dict = {}
        self._episodes_seen: set = set()
        self.fallback_seq: Optional[tuple[str, ...]] = None
        self.fallback_index = 0
        self.next_request_id = 1
        self._done = False

    # -- per-agent action policies ------------------------------------

    def _other_action(self, spec: AgentSpec) -> str:
        if spec.policy == "script":
            return spec.script[min(self.tick, len(spec.script) - 1)]
        if spec.policy == "plan":
            beliefs = {
                spec.id: sense(self.scenario, spec, self.state, self.rng)
            }
            frame = build_frame(self.scenario, spec.id, beliefs)
            dominant = has_dominant_strategy(frame, spec.id, self.budget)
            return dominant.actions[0] if dominant else spec.hold
        return spec.hold

    def _joint(self, ata_action: Optional[str]) -> dict[str, str]:
        joint = {}
        for spec in self.scenario.agents:
            if spec.normative:
                continue
            if self.scenario.ata == spec.id and ata_action is not None:
                joint[spec.id] = ata_action
            else:
                joint[spec.id] = self._other_action(spec)
        return joint

    def _apply(self, joint: dict[str, str], sacrificed: frozenset, record: dict):
        pre = self.state
        self.state = self.scenario.transition.step(self.state, joint)
        per_tick = {}
        for monitor in self.monitors:
            monitor.observe(pre, self.state, sacrificed)
            per_tick[monitor.spec.goal] = [monitor.num, monitor.den]
        record["actions"] = dict(sorted(joint.items()))
        record["state"] = self.state.as_dict()
        record["sacrificed"] = sorted(sacrificed)
        if per_tick:
            record["monitors"] = per_tick
        self.lines.append(record)
        self.tick_digests.append(
            {"tick": record["tick"], "sha256": tick_digest(record)}
        )
        self.channel.notify(
            {"type": "tick", "tick": record["tick"], "state": record["state"]}
        )
        self.tick += 1

    # -- tick variants -------------------------------------------------

    def _handover_tick(self) -> None:
        """World motion while waiting on the authority: the deliberating
        agent holds, nothing is sensed for it, nothing is detected."""
        ata = self.scenario.agent_spec(self.scenario.ata)
        record = {
            "record": "tick",
            "tick": self.tick,
            "handover": True,
            "request_id": self.next_request_id - 1,
        }
        self._apply(self._joint(ata.hold), frozenset(), record)

    def _fallback_tick(self) -> None:
        seq = self.fallback_seq
        action = seq[min(self.fallback_index, len(seq) - 1)]
        self.fallback_index += 1
        record = {"record": "tick", "tick": self.tick, "fallback": True}
        self._apply(self._joint(action), frozenset(), record)

    def _full_tick(self) -> None:
        scenario = self.scenario
        if self.fallback_seq is not None:
            self._fallback_tick()
            return
        detection_tick = self.tick
        pre_state = self.state
        beliefs: dict[str, BeliefState] = {}
        injected_now = []
        for spec in scenario.agents:
            if spec.normative:
                continue
            mine = [
                inj
                for inj in scenario.belief_injections
                if inj.tick == detection_tick and inj.agent == spec.id
            ]
            beliefs[spec.id] = sense(scenario, spec, pre_state, self.rng, mine)
            injected_now.extend(
                {"agent": inj.agent, "feature": inj.feature} for inj in mine
            )
        verdict = None
        exits_firing = False
        active_vodd = None
        if scenario.vodd_network is not None and scenario.ata is not None:
            verdict = vodd_mod.step(
                scenario.vodd_network,
                self.engine,
                beliefs[scenario.ata],
                scenario.plan,
            )
            if isinstance(verdict, vodd_mod.Switch):
                self.engine = vodd_mod.EngineState(verdict.vodd)
            exits_firing = not isinstance(verdict, vodd_mod.Stay)
            active_vodd = scenario.vodd_network.get(self.engine.active)
        believed = None
        frame = None
        dominant = None
        if scenario.ata is not None:
            frame = build_frame(scenario, scenario.ata, beliefs)
            dominant = has_dominant_strategy(frame, scenario.ata, self.budget)
            if dominant is None:
                believed = detect_believed_conflict(
                    scenario.ata, frame, self.budget, detection_tick
                )
        actual = detect_actual_conflict(
            pre_state,
            self._truth_agents,
            scenario.transition,
            scenario.horizon,
            self.budget,
            detection_tick,
        )
        conflict = classify_conflict(believed, actual)
        if conflict is not None:
            self.conflicts.append(conflict)
        ata_action = None
        transfer_json = None
        sacrificed: frozenset = frozenset()
        if scenario.ata is not None:
            ata_spec = scenario.agent_spec(scenario.ata)
            if believed is None:
                ata_action = dominant.actions[0]
                if conflict is not None:
                    self._note_unaware(conflict, dominant.actions, pre_state)
            else:
                episode = (conflict.participants, conflict.goals_at_stake)
                if episode in self.standing:
                    action, kept = self.standing[episode]
                    ata_action = action
                    sacrificed = kept
                    transfer_json = {"standing": True, "chosen": action}
                else:
                    at_stake = conflict.goals_at_stake
                    options = vodd_mod.build_options(
                        frame, scenario.ata, at_stake, self.budget
                    )
                    in_scope = active_vodd is not None and vodd_mod.within_scope(
                        conflict, active_vodd, options, exits_firing
                    )
                    if in_scope:
                        action = vodd_mod.resolve(conflict, active_vodd, options)
                        chosen = next(o for o in options if o.action == action)
                        ata_action = action
                        sacrificed = chosen.sacrifices
                        transfer_json = None
                        self._note_outcome(
                            conflict,
                            pre_state,
                            outcome="InScope",
                            chosen=action,
                        )
                    else:
                        ata_action, sacrificed, transfer_json = self._transfer(
                            conflict, frame, options, ata_spec, pre_state, episode
                        )
        record = {
            "record": "tick",
            "tick": self.tick,
            "handover": False,
            "beliefs": {
                agent: {
                    "support": [
                        {"state": s.as_dict(), "mass": m}
                        for s, m in belief.support
                    ]
                }
                for agent, belief in beliefs.items()
            },
            "verdict": vodd_mod.verdict_to_json(verdict) if verdict else None,
            "active_vodd": self.engine.active if self.engine else None,
            "conflict": _conflict_json(conflict) if conflict else None,
            "transfer": transfer_json,
        }
        if injected_now:
            record["injections"] = injected_now
        self._apply(self._joint(ata_action), sacrificed, record)
        if scenario.terminal is not None and scenario.terminal.evaluate(
            self.state.as_dict()
        ):
            self._done = True

    # -- conflict handling ----------------------------------------------

    def _note_outcome(
        self,
        conflict: Conflict,
        state: WorldState,
        outcome: str,
        chosen: Optional[str] = None,
        explanation: Optional[str] = None,
        request_id: Optional[int] = None,
    ) -> None:
        key = (conflict.kind, conflict.participants, conflict.goals_at_stake)
        if key in self._episodes_seen:
            return
        self._episodes_seen.add(key)
        if explanation is None and self.scenario.ata is not None:
            try:
                e = build_anticipated(
                    conflict,
                    self.scenario.ata,
                    self._hierarchies,
                    self._observations,
                )
                explanation = render_explanation(e, verbose=self.verbose)
            except IncompleteWitness:
                explanation = None
        self.kb_entries.append(
            {
                "scenario": self.scenario.name,
                "scenario_path": self.scenario.source_path,
                "scenario_digest": self.scenario.digest,
                "seed": self.seed,
                "ticks": self.ticks,
                "tick": conflict.detected_at,
                "kind": conflict.kind,
                "participants": sorted(conflict.participants),
                "goals_at_stake": sorted(conflict.goals_at_stake),
                "state": state.as_dict(),
                "outcome": outcome,
                "chosen": chosen,
                "request_id": request_id,
                "explanation": explanation,
            }
        )

    def _note_unaware(
        self, conflict: Conflict, taken: Sequence[str], state: WorldState
    ) -> None:
        key = (conflict.kind, conflict.participants, conflict.goals_at_stake)
        if key in self._episodes_seen:
            return
        self._episodes_seen.add(key)
        try:
            e = build_observed(
                conflict,
                self.scenario.ata,
                list(taken),
                state.as_dict(),
                self._hierarchies,
            )
            text = render_explanation(e, verbose=self.verbose)
        except IncompleteWitness:
            text = None
        self.kb_entries.append(
            {
                "scenario": self.scenario.name,
                "scenario_path": self.scenario.source_path,
                "scenario_digest": self.scenario.digest,
                "seed": self.seed,
                "ticks": self.ticks,
                "tick": conflict.detected_at,
                "kind": conflict.kind,
                "participants": sorted(conflict.participants),
                "goals_at_stake": sorted(conflict.goals_at_stake),
                "state": state.as_dict(),
                "outcome": "Unaware",
                "chosen": None,
                "request_id": None,
                "explanation": text,
            }
        )

    def _transfer(
        self,
        conflict: Conflict,
        frame: StrategicFrame,
        options,
        ata_spec: AgentSpec,
        pre_state: WorldState,
        episode,
    ):
        scenario = self.scenario
        others_first = {
            a.id: a.actions[0]
            for a in scenario.agents
            if not a.normative and a.id != scenario.ata
        }
        no_safe = False
        try:
            holds = estimate_deadline(
                scenario.transition,
                pre_state,
                scenario.ata,
                ata_spec.hold,
                ata_spec.fallback,
                others_first,
                self._safety,
                scenario.horizon,
            )
        except NoSafeTick:
            holds = 0
            no_safe = True
        deadline = min(self.tick + holds, self.ticks - 1)
        explanation = build_anticipated(
            conflict, scenario.ata, self._hierarchies, self._observations
        )
        request = TransferRequest(
            request_id=self.next_request_id,
            tick=self.tick,
            deadline_tick=deadline,
            explanation=explanation,
            options=tuple(options),
            fallback=ata_spec.fallback,
        )
        self.next_request_id += 1
        outcome = initiate_transfer(request, self.channel, self._clock)
        transfer_json = {
            "standing": False,
            "request": request.to_json(verbose=self.verbose),
            "no_safe_tick": no_safe,
        }
        if isinstance(outcome, Resolved):
            chosen = next(o for o in options if o.action == outcome.chosen)
            self.standing[episode] = (outcome.chosen, chosen.sacrifices)
            transfer_json["outcome"] = {
                "result": "resolved",
                "chosen": outcome.chosen,
                "tick": outcome.tick,
            }
            self.channel.notify(
                {
                    "type": "outcome",
                    "request_id": request.request_id,
                    "outcome": "resolved",
                    "cause": None,
                }
            )
            self.transfers.append(transfer_json)
            self._note_outcome(
                conflict,
                pre_state,
                outcome="Resolved",
                chosen=outcome.chosen,
                explanation=render_explanation(explanation, verbose=self.verbose),
                request_id=request.request_id,
            )
            return outcome.chosen, chosen.sacrifices, transfer_json
        # fallback engages now and persists to the end of the run
        self.fallback_seq = ata_spec.fallback
        self.fallback_index = 1
        transfer_json["outcome"] = {
            "result": "fallback",
            "cause": outcome.cause,
            "tick": outcome.tick,
        }
        self.channel.notify(
            {
                "type": "outcome",
                "request_id": request.request_id,
                "outcome": "fallback",
                "cause": outcome.cause,
            }
        )
        self.transfers.append(transfer_json)
        self._note_outcome(
            conflict,
            pre_state,
            outcome="Fallback",
            chosen=None,
            explanation=render_explanation(explanation, verbose=self.verbose),
            request_id=request.request_id,
        )
        return ata_spec.fallback[0], frozenset(), transfer_json

    # -- driving ---------------------------------------------------------

    def run(self) -> RunResult:
        while self.tick < self.ticks and not self._done:
            self._full_tick()
        conflict_ticks: dict[str, int] = {}
        for line in self.lines:
            c = line.get("conflict")
            if c:
                conflict_ticks[c["kind"]] = conflict_ticks.get(c["kind"], 0) + 1
        monitor_results = {m.spec.goal: m.result() for m in self.monitors}
        summary = {
            "record": "summary",
            "ticks_run": self.tick,
            "final_state": self.state.as_dict(),
            "conflict_ticks": conflict_ticks,
            "transfers": {
                "requests": len(self.transfers),
                "resolved": sum(
                    1
                    for t in self.transfers
                    if t["outcome"]["result"] == "resolved"
                ),
                "fallbacks": sum(
                    1
                    for t in self.transfers
                    if t["outcome"]["result"] == "fallback"
                ),
            },
            "fallback_engaged": self.fallback_seq is not None,
            "monitors": monitor_results,
        }
        self.lines.append(summary)
        for entry in self.kb_entries:
            entry["trace_digests"] = list(self.tick_digests)
        return RunResult(
            lines=self.lines,
            tick_digests=self.tick_digests,
            conflicts=self.conflicts,
            kb_entries=self.kb_entries,
            monitors=monitor_results,
            final_state=self.state,
            transfers=self.transfers,
            fallback_engaged=self.fallback_seq is not None,
            ticks_run=self.tick,
        )


def run_simulation(
    scenario: Scenario,
    seed: int = 0,
    ticks: int = 10,
    budget: int = DEFAULT_BUDGET,
    channel: Optional[AuthorityChannel] = None,
    verbose: bool = True,
    log_path: Optional[str] = None,
) -> RunResult:
    sim = Simulation(
        scenario,
        seed=seed,
        ticks=ticks,
        budget=budget,
        channel=channel,
        verbose=verbose,
    )
    result = sim.run()
    if log_path is not None:
        write_log(result.lines, log_path)
    return result
