"""Exception types shared across the package."""


class RedsimError(Exception):
    """Base class for all domain errors raised by this package."""


class ScenarioSyntaxError(RedsimError):
    """Raised when a scenario/images/actions file is not valid input text.

    Carries the 0-based line/column of the offending token when known.
    """

    def __init__(self, message, line=None, column=None, filename=None):
        self.line = line
        self.column = column
        self.filename = filename
        where = ""
        if line is not None:
            where = f" at line {line + 1}, column {(column or 0) + 1}"
        if filename:
            where += f" in {filename}"
        super().__init__(f"{message}{where}")


class ScenarioReferenceError(RedsimError):
    """A name in one file points at a definition that does not exist."""

    def __init__(self, message, dangling_name):
        self.dangling_name = dangling_name
        super().__init__(message)


class ScenarioInvariantError(RedsimError):
    """A parsed value violates a structural invariant."""

    def __init__(self, message, field):
        self.field = field
        super().__init__(message)


class AddressPoolExhausted(RedsimError):
    """A subnet has fewer usable addresses than hosts assigned to it."""


class MalformedActionError(RedsimError):
    """Action parameters do not match the action's schema.

    Distinct from an unmet precondition: this signals a bug in the caller
    (typically the action wrapper), not a state the agent can reach.
    """


class MaskViolationError(RedsimError):
    """An encoded action referenced a masked (illegal) head position."""


class StepAfterDoneError(RedsimError):
    """step() was called on an environment whose episode already ended."""
