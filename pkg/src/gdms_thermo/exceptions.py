"""Exception and warning types raised by gdms_thermo."""


class GDMSError(Exception):
    """Base class for all errors raised by this package."""


class SystemParseError(GDMSError, ValueError):
    """The system document is malformed or violates the schema."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class PoleError(GDMSError, ArithmeticError):
    """A rational map was evaluated at (or numerically at) one of its poles."""


class RootFindingError(GDMSError):
    """Simultaneous root iteration failed to converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NotIrreducibleError(GDMSError):
    """An operation requiring a strongly connected graph got one that is not."""


class ConvergenceError(GDMSError):
    """An iterative scheme did not reach its tolerance."""


class BudgetExceededError(GDMSError):
    """The requested enumeration would exceed the configured budget."""


class BlowupError(GDMSError):
    """A backward orbit left the bounded region assumed to contain J(S)."""


class NoRepellingPointError(GDMSError):
    """No repelling periodic point was found within the loop-length budget."""


class HoleValidationError(GDMSError):
    """No admissible hole center exists for the requested radius."""

    def __init__(self, message, best_clearance=None):
        super().__init__(message)
        self.best_clearance = best_clearance


class BowenError(GDMSError):
    """The pressure estimator has no sign change or is not monotone."""


class MultiplicityWarning(UserWarning):
    """Clustered (multiple) roots were merged; a target sits near a critical value."""


class DegreeDropWarning(UserWarning):
    """Some preimages of a point lie at infinity."""


class HeuristicWarning(UserWarning):
    """A sampled or truncated check could not certify its condition."""
