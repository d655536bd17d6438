"""Exception hierarchy shared by the solver modules.

Every failure the command line maps to an exit code derives from
:class:`PeelError`; the ``exit_code`` attribute carries that mapping so the
CLI does not need to know which module raised.
"""


class PeelError(Exception):
    """Base class for all solver errors."""

    exit_code = 1


class DomainError(PeelError, ValueError):
    """A quantity was requested outside the set where it is defined."""


class StructuralError(PeelError, ValueError):
    """An object violates a structural invariant (e.g. a non-invertible map)."""


class ValidationError(PeelError, ValueError):
    """User input (scenario, data, candidate front) failed validation."""

    exit_code = 4


class ConvergenceError(PeelError, RuntimeError):
    """A fixed-point iteration did not reach its tolerance."""

    exit_code = 2

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonExistenceError(PeelError, RuntimeError):
    """The coupled problem admits no Lipschitz front from the current state."""

    exit_code = 3

    def __init__(self, message, diagnosis=None):
        super().__init__(message)
        self.diagnosis = diagnosis or message
        self.windows = None  # index of the window at which the stop happened
