"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CoordMechError(Exception):
    exit_code = 1


class InputError(CoordMechError, ValueError):
    """Malformed input: unknown labels, dimension mismatches, parse errors."""

    exit_code = 2


class RejectionError(CoordMechError):
    """A well-formed request that cannot be honoured (e.g. target not jointly coherent)."""

    exit_code = 3

    def __init__(self, message, reasons=()):
        super().__init__(message)
        self.reasons = list(reasons)


class BudgetExceeded(CoordMechError):
    exit_code = 4


class ConvergenceError(CoordMechError):
    exit_code = 5

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class InconsistentConstraints(CoordMechError):
    """Constraint system with no feasible point. Never raised for a valid DGP."""

    exit_code = 5
