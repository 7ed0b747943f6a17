"""Exception hierarchy shared across the package."""


class RoaError(Exception):
    """Base class for all package errors."""


class ParseError(RoaError):
    """Malformed or schema-violating system/config file."""


class EquilibriumError(RoaError):
    """Steady-state power residual exceeds tolerance."""


class TopologyError(RoaError):
    """Machine branch graph is disconnected."""


class DimensionError(RoaError):
    """State dimension does not match the system."""


class NonFiniteError(RoaError):
    """An integrator stage produced NaN/Inf (trajectory blow-up)."""


class NotConvergedError(RoaError):
    """Lyapunov estimate requested for a non-convergent trajectory."""


class DegenerateTrajectoryError(RoaError):
    """All trajectory states below the norm floor; curvature bound undefined."""


class NotHurwitzError(RoaError):
    """Linearization at the origin has an eigenvalue with non-negative real part."""


class FactorizationError(RoaError):
    """Kernel matrix factorization failed even with maximal jitter."""


class EmptyDomainError(RoaError):
    """Exclusion balls cover every candidate point in the sampling box."""


class BudgetExhaustedError(RoaError):
    """Could not collect the requested stable samples within the iteration cap."""


class CertificateVoidError(RoaError):
    """Energy-function certificate constant is non-positive."""


class ConsistencyError(RoaError):
    """Model checkpoint and sampling records disagree."""
