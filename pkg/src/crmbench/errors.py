"""Exception types shared across the package.

Content-level problems (a call that is well-formed but wrong) are reported as
violation values, not exceptions; exceptions are reserved for contract
breaches and infrastructure failures.
"""

from __future__ import annotations


class CrmBenchError(Exception):
    """Base class for all package errors."""


# -- schema registry ---------------------------------------------------------

class DuplicateNameError(CrmBenchError):
    """A schema with this name is already registered."""


class InvalidSchemaError(CrmBenchError):
    """A schema breaks one of its structural invariants."""


class UnknownFunctionError(CrmBenchError):
    """No schema registered under the requested function name."""


# -- intermediate language ---------------------------------------------------

class IrSyntaxError(CrmBenchError):
    """Parse failure, carrying the position that caused it."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownVerbError(IrSyntaxError):
    pass


class DuplicateKeyError(IrSyntaxError):
    pass


class NoMatchingSchemaError(CrmBenchError):
    """No registered schema serves this (verb, object type) combination."""


class AmbiguousSchemaError(CrmBenchError):
    """More than one registered schema serves this combination."""


class MappingError(CrmBenchError):
    """An argument cannot be placed into the target schema."""


class UnboundStepError(CrmBenchError):
    """A placeholder references a step with no bound response."""


class MissingPathError(CrmBenchError):
    """A placeholder path does not exist in the bound response."""

    def __init__(self, step_index: int, path: str):
        super().__init__(f"path {path!r} not found in step {step_index} response")
        self.step_index = step_index
        self.path = path


# -- model backends ----------------------------------------------------------

class BackendError(CrmBenchError):
    """A model backend failed to produce a completion."""


class MissingScriptError(BackendError):
    """The scripted backend has no entry for the requested key."""


class TransportError(BackendError):
    """HTTP backend transport failure."""


class UnknownModelError(CrmBenchError):
    """No price configured for this model."""


# -- validator / pipelines ---------------------------------------------------

class EmptyVerdictError(CrmBenchError):
    """render_feedback called on a passing verdict."""


class MaxAttemptsExceededError(CrmBenchError):
    """The repair loop ran out of attempts; carries the last verdict."""

    def __init__(self, attempts: int, verdict):
        super().__init__(f"no valid plan after {attempts} attempts")
        self.attempts = attempts
        self.verdict = verdict


class InjectionError(CrmBenchError):
    """Value injection between plan steps failed."""

    def __init__(self, step_index: int, path: str):
        super().__init__(
            f"cannot inject value: step {step_index} response has no path {path!r}"
        )
        self.step_index = step_index
        self.path = path


# -- benchmark harness -------------------------------------------------------

class UnknownGoldError(CrmBenchError):
    """Retrieval asked to guarantee a gold function that is not registered."""


class DatasetParseError(CrmBenchError):
    """A dataset file could not be parsed; carries the offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class ConsistencyError(CrmBenchError):
    """A dataset record breaks a cross-field invariant."""


class InsufficientRepeatsError(CrmBenchError):
    """Reliability needs at least two repeats per query."""


class MissingVerdictsError(CrmBenchError):
    """Metric computation requires human verdicts that are not present."""

    def __init__(self, missing):
        super().__init__(f"{len(missing)} runs lack human verdicts")
        self.missing = list(missing)


class DegenerateInputError(CrmBenchError):
    """Scaling fit needs at least two distinct call counts with positive latency."""


# -- evaluation service ------------------------------------------------------

class EmptyLogsError(CrmBenchError):
    """The evaluation queue was built from run logs with no items."""
