"""Exception taxonomy for the stepsearch engine."""

from __future__ import annotations


class StepSearchError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StepSearchError):
    """A value violated a structural invariant (empty statement, bad choices, ...)."""


class StateError(StepSearchError):
    """Illegal state transition, e.g. appending to a terminal state."""


class DepthLimitError(StateError):
    """Transition would exceed the configured maximum depth."""


class CatalogError(StepSearchError):
    """Action not present in the catalog, or a malformed template file."""


class RuleConflictError(StepSearchError):
    """Every action kind was filtered out; carries the always-safe fallback."""

    def __init__(self, message: str, fallback: frozenset):
        super().__init__(message)
        self.fallback = fallback


class ScoringError(StepSearchError):
    """A reward backend failed to produce a usable score."""


class NumericError(ScoringError):
    """Non-finite input reached a numeric routine."""


class TransportError(StepSearchError):
    """HTTP backend unreachable after the configured retries."""


class ProtocolError(StepSearchError):
    """A backend or runner response did not match the wire contract."""


class GenerationError(StepSearchError):
    """The policy backend produced no usable candidates."""


class SandboxError(StepSearchError):
    """Code runner crashed or desynchronized; the session is recreated."""


class SearchError(StepSearchError):
    """The search finished without a single answered trajectory."""


class AggregationError(SearchError):
    """No answered trajectories were available for voting."""


class AssumptionViolation(StepSearchError):
    """Simulation family violates the separation/uniqueness assumptions."""


class DatasetError(StepSearchError):
    """Dataset file missing or malformed; message names the offending line."""


class TraceError(StepSearchError):
    """Trace file unreadable or structurally corrupt."""


class PersistError(StepSearchError):
    """Trace or report sink could not be written."""


class ConfigError(StepSearchError):
    """Run configuration is incomplete or inconsistent."""


class InternalError(StepSearchError):
    """Internal consistency check failed; indicates a bug, not bad input."""
