"""Exception types shared across the package."""


class NomaError(Exception):
    """Base class for package errors."""


class DomainError(NomaError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ComplexityGuardError(NomaError, ValueError):
    """An exhaustive search or subset enumeration would be too large."""


class InfeasibleError(NomaError, ValueError):
    """A configuration cannot be realised (e.g. more orthogonal sequences than chips)."""


class ConvergenceError(NomaError, RuntimeError):
    """A root-finding search did not reach its target inside the bracket."""
