"""Exception hierarchy shared by every deepfmea module."""

from __future__ import annotations


class DeepFMEAError(Exception):
    """Base class for all library errors."""


class InvariantError(DeepFMEAError, ValueError):
    """An entity violates one of its type invariants."""


class UnknownIdError(DeepFMEAError, KeyError):
    def __init__(self, entity_id: str, what: str = "id"):
        self.entity_id = entity_id
        self.what = what
        super().__init__(f"unknown {what}: {entity_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class DuplicateIdError(DeepFMEAError):
    def __init__(self, entity_id: str):
        self.entity_id = entity_id
        super().__init__(f"duplicate id: {entity_id!r}")


class DanglingReferenceError(DeepFMEAError):
    def __init__(self, missing_id: str, referrer: str | None = None):
        self.missing_id = missing_id
        self.referrer = referrer
        where = f" (referenced by {referrer!r})" if referrer else ""
        super().__init__(f"dangling reference: {missing_id!r}{where}")


class DependentExistsError(DeepFMEAError):
    def __init__(self, entity_id: str, dependents: list[str]):
        self.entity_id = entity_id
        self.dependents = sorted(dependents)
        super().__init__(
            f"cannot delete {entity_id!r}: referenced by {', '.join(self.dependents)}"
        )


class ShapeMismatchError(DeepFMEAError, ValueError):
    def __init__(self, what: str, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class IngestError(DeepFMEAError):
    pass


class OperatorError(DeepFMEAError, ValueError):
    """Raised by an atomic operation; ``node_id`` is filled in during graph evaluation."""

    def __init__(self, message: str, node_id: str | None = None):
        self.node_id = node_id
        self.message = message
        super().__init__(message if node_id is None else f"node {node_id!r}: {message}")

    def at(self, node_id: str) -> "OperatorError":
        err = type(self)(self.message, node_id)
        return err


class DivisionError(OperatorError):
    pass


class EmptyWindowError(OperatorError):
    pass


class GraphCycleError(DeepFMEAError):
    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("cycle: " + " -> ".join(self.cycle))


class MissingMeasurementError(DeepFMEAError):
    pass


class PreconditionError(DeepFMEAError, ValueError):
    pass


class SpecError(DeepFMEAError):
    """Model-spec or cost-file problem; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, violations: list[str] | None = None):
        self.line = line
        self.violations = list(violations or [])
        text = message if line is None else f"line {line}: {message}"
        if self.violations:
            text += "\n  " + "\n  ".join(self.violations)
        super().__init__(text)


class StageError(DeepFMEAError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
