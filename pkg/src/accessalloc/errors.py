"""Exception hierarchy shared by every module of the package."""


class AccessAllocError(Exception):
    """Base class for all errors raised by accessalloc."""


class ValidationError(AccessAllocError, ValueError):
    """An input violates a documented domain constraint."""


class ScaleError(AccessAllocError):
    """A problem exceeds a combinatorial or memory guard."""


class InfeasibleError(AccessAllocError):
    """A linear program that should be feasible reported infeasibility."""
