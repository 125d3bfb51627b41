"""Exception hierarchy shared by all spde_lab modules."""


class SpdeLabError(Exception):
    """Base class for all toolkit errors."""


class DomainError(SpdeLabError, ValueError):
    """A parameter lies outside its mathematical domain (e.g. H outside (0,1))."""


class InputError(SpdeLabError, ValueError):
    """Malformed, empty or inconsistent input data."""


class CapabilityError(SpdeLabError, NotImplementedError):
    """The requested combination is valid mathematics but outside toolkit scope."""


class NumericalError(SpdeLabError, ArithmeticError):
    """A numerical procedure failed (factorization, overflow, non-convergence)."""


class ConditionNotSatisfiedError(DomainError):
    """An existence condition required by an estimator does not hold.

    Carries the failing verdict so callers can inspect or serialize it.
    """

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict
