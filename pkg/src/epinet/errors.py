"""Exception hierarchy shared by all epinet modules.

Every error maps onto one CLI exit code: validation problems exit with 1,
numerical failures with 2.
"""


class EpinetError(Exception):
    """Base class for all errors raised by epinet."""

    exit_code = 2


class ValidationError(EpinetError):
    """Input does not satisfy a model assumption.

    ``violations`` holds one human-readable line per detected problem.
    """

    exit_code = 1

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class StructuralError(ValidationError):
    """Shapes or dimensions are inconsistent."""


class DataError(ValidationError):
    """Non-finite or out-of-range entries."""


class DomainError(ValidationError):
    """A value lies outside the domain of a formula (negative state, zero nu)."""


class ScenarioError(ValidationError):
    """Scenario document failed schema validation.

    ``pointer`` is the JSON pointer of the offending node.
    """

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}", [f"{pointer or '/'}: {message}"])
        self.pointer = pointer


class PreconditionError(EpinetError):
    """A quantity is undefined for the given inputs (e.g. rank too small)."""

    exit_code = 1


class NumericalError(EpinetError):
    """A numerical routine failed."""


class DegeneracyError(NumericalError):
    """Null space of the scaled flux matrix is not one-dimensional."""


class ConvergenceError(NumericalError):
    """An iteration hit its limit; ``gap`` is the last convergence measure."""

    def __init__(self, message, iterations=None, gap=None):
        super().__init__(message)
        self.iterations = iterations
        self.gap = gap


class StiffnessError(NumericalError):
    """Step size underflow during time integration at time ``t``."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class PositivityError(NumericalError):
    """Trajectory left the nonnegative orthant beyond the clipping floor."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t
