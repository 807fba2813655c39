"""Exception types shared across the package."""


class JMAError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(JMAError):
    """A Cholesky pivot fell below the rank tolerance (Jacobian lost full rank)."""


class DegenerateDiagonal(JMAError):
    """NNLS coordinate with zero curvature and a descent direction: the dual is unbounded."""


class InvalidOrder(JMAError):
    """Hadamard order is not a power of two (or the codebook request is inconsistent)."""


class AlreadyTarget(JMAError):
    """The starting point already decodes to the requested target."""


class Infeasible(JMAError):
    """No point satisfies the constraint system."""


class ConfigMismatch(JMAError):
    """Model, dataset and encoding shapes disagree."""


class SchemaMismatch(JMAError):
    """Report files do not share the expected column layout."""
