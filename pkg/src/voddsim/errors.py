"""Exception types shared across the simulator.

Domain failures get their own classes so callers can map them to exit
codes without string matching. IO failures propagate as plain OSError.
"""

from __future__ import annotations


class VoddSimError(Exception):
    """Base class for all domain errors raised by this package."""


class ExprSyntaxError(VoddSimError):
    """Predicate text rejected by the parser.

    position is a 0-based character offset into the source string.
    """

    def __init__(self, message: str, position: int, source: str = ""):
        self.position = position
        self.source = source
        super().__init__(f"{message} (at position {position})")


class UnknownFeature(VoddSimError):
    """A predicate referenced a feature the state does not declare."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown feature: {name!r}")


class IllegalAction(VoddSimError):
    """An action id outside the acting agent's declared action set."""


class EmptyActionSet(VoddSimError):
    """An adjustment would leave an agent with no actions."""


class SearchBudgetExceeded(VoddSimError):
    """Strategy enumeration would exceed the configured evaluation cap."""

    def __init__(self, needed: int, budget: int):
        self.needed = needed
        self.budget = budget
        super().__init__(
            f"search needs {needed} profile/state evaluations, budget is {budget}"
        )


class ValidationError(VoddSimError):
    """A scenario, model, or network file failed structural validation."""

    def __init__(self, message: str, field: str = ""):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DanglingVoddRef(ValidationError):
    """A network or engine referenced a VODD id that does not exist."""


class NoSafeTick(VoddSimError):
    """No tick admits a fallback execution satisfying the safety goals."""


class IncompleteWitness(VoddSimError):
    """A conflict witness lacks the fields an explanation needs."""


class NoInitialStates(VoddSimError):
    """An interaction model declared no initial states."""


class RecordNotFound(VoddSimError):
    """A knowledge-base record id was not present."""


class MissingScenario(VoddSimError):
    """A knowledge-base record points at a scenario file that is gone."""


class WindowOutOfRange(VoddSimError):
    """A report window lies outside the ticks a log covers."""


class UnknownGoal(VoddSimError):
    """A monitor or report referenced an undeclared goal id."""
