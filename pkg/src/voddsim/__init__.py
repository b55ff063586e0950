"""Deterministic multi-agent conflict simulation and analysis.

The package models deliberating agents whose goals sit in priority
hierarchies, detects conflicts both as the agents believe the world to be
and as it actually is, scopes which conflicts an agent may settle on its
own, and hands the rest to an external authority with a deadline and an
explanation. Everything a run does is reproducible bit for bit from the
scenario file, the seed, and the tick count.
"""

from .dynamics import (
    FeatureDecl,
    Kinematic1D,
    KinematicAgent,
    ObservationSpec,
    TableTransition,
    WorldState,
)
from .errors import (
    DanglingVoddRef,
    EmptyActionSet,
    ExprSyntaxError,
    IllegalAction,
    IncompleteWitness,
    MissingScenario,
    NoInitialStates,
    NoSafeTick,
    RecordNotFound,
    SearchBudgetExceeded,
    UnknownFeature,
    UnknownGoal,
    ValidationError,
    VoddSimError,
    WindowOutOfRange,
)
from .expr import Predicate, parse_expression, parse_predicate
from .game_core import (
    DEFAULT_BUDGET,
    AgentModel,
    BehaviourAdjustment,
    BeliefAdjustment,
    BeliefState,
    Conflict,
    Goal,
    GoalAdjustment,
    GoalHierarchy,
    Ordering,
    SatisfactionVector,
    StrategicFrame,
    Strategy,
    Trace,
    all_strategies,
    apply_adjustment,
    classify_conflict,
    compare_strategies,
    compare_vectors,
    detect_actual_conflict,
    detect_believed_conflict,
    effective_hierarchy,
    evaluate_goal,
    has_dominant_strategy,
    maximal_consequences,
    merge_believed,
    rollout,
    satisfaction_vector,
)
from .knowledge_base import append_entries, load_kb, match_report, replay_record
from .reachability import ConflictFinding, explore, export_test_cases
from .scenario import (
    AgentSpec,
    AuthoritySpec,
    BeliefInjection,
    MonitorSpec,
    Scenario,
    adjusted,
    load_scenario,
    parse_scenario,
    scenario_to_json,
)
from .transfer import (
    Explanation,
    FallbackExecuted,
    Resolution,
    Resolved,
    ScriptedAuthority,
    TransferRequest,
    build_anticipated,
    build_observed,
    estimate_deadline,
    initiate_transfer,
    render_explanation,
)
from .vodd import (
    Condition,
    Domain,
    EngineState,
    ExitCondition,
    InvariantBreach,
    Option,
    Stay,
    Switch,
    Vodd,
    VoddNetwork,
    VoddRef,
    build_options,
    can_enter,
    confidence,
    load_network,
    parse_network,
    resolve,
    within_scope,
)
from .vodd import Delegate, step as vodd_step
from .world_sim import (
    PatternMonitor,
    RunResult,
    Simulation,
    build_frame,
    load_log,
    run_simulation,
    sense,
    write_log,
)

__version__ = "0.1.0"
