"""Semantic exception hierarchy shared by all rdgen modules."""


class RdgenError(Exception):
    """Base class for all rdgen errors."""


class InputError(RdgenError, ValueError):
    """Invalid argument: domain violation, alphabet mismatch, malformed data."""


class SizeError(RdgenError):
    """Problem instance exceeds an exact-mode or enumeration size limit."""


class FeasibilityError(RdgenError):
    """Constrained optimization has an empty feasible set.

    Carries the achievable range so callers can reformulate.
    """

    def __init__(self, message, achievable_range=None):
        super().__init__(message)
        self.achievable_range = achievable_range


class ConvergenceError(RdgenError):
    """Iterative solver hit its iteration cap. Carries the last iterate."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
