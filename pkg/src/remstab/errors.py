"""Exception hierarchy shared by all remstab modules."""


class RemstabError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(RemstabError):
    """An input violates a documented precondition (dimension mismatch, bad parameters)."""


class GeometryError(RemstabError):
    """A geometric quantity is ill-defined (singular metric, degenerate data)."""


class ChartDomainError(GeometryError):
    """A point lies outside the validity domain of the chart."""


class ResidualError(RemstabError):
    """The candidate point is not a relative equilibrium to the required tolerance."""


class InconsistencyError(RemstabError):
    """Two quantities that theory forces to agree disagree numerically."""


class NotApplicableError(RemstabError):
    """The requested operation does not apply to the given configuration."""


class ValidationError(RemstabError):
    """A configuration file or CLI input failed validation."""
