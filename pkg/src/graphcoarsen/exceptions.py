"""Exception and warning types shared across the package."""

__all__ = [
    "SingularSystemError",
    "IndefiniteOperatorError",
    "DisconnectedGraphError",
    "InfeasibleConstraintError",
    "RepairWarning",
]


class SingularSystemError(RuntimeError):
    """Operator has no unique solution (e.g. pure-Neumann Laplacian)."""


class IndefiniteOperatorError(RuntimeError):
    """A quadratic form expected to be nonnegative came out negative."""


class DisconnectedGraphError(RuntimeError):
    """Graph is disconnected where a connected one is required."""


class InfeasibleConstraintError(RuntimeError):
    """A localized basis problem has unsatisfiable constraints."""


class RepairWarning(UserWarning):
    """A degenerate configuration was repaired and the result may be off
    the common path (isolated vertex, empty cluster, fragment move, ...)."""
