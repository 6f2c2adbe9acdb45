"""Exception taxonomy shared by all triwell modules.

The CLI maps these onto exit codes, so solvers raise (or return flags)
consistently: configuration problems are caught before any heavy work,
precondition violations name the failed condition, and non-convergence is
only an *error* where the contract demands one (most solvers instead return
a ``converged`` flag).
"""


class TriwellError(Exception):
    """Base class for all triwell errors."""


class ConfigurationError(TriwellError):
    """Invalid parameters for a potential family, construction, or run config."""


class DomainError(TriwellError):
    """Input outside an operation's mathematical domain (non-finite point,
    nonpositive eigenvalue, region escaping a grid, ...)."""


class PreconditionError(TriwellError):
    """A documented operation precondition does not hold for the given input."""


class StructureError(PreconditionError):
    """A path or trace does not have the transition structure an operation
    requires; the message names the structure that was actually found."""


class NonConvergenceError(TriwellError):
    """An iterative solver failed to converge where the contract requires it."""
