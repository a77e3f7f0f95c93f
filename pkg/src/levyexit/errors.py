"""Exception hierarchy shared by all levyexit modules."""


class LevyExitError(Exception):
    """Base class for all errors raised by levyexit."""


class ParameterError(LevyExitError, ValueError):
    """Invalid parameters for a measure, potential or configuration."""


class DomainError(LevyExitError, ValueError):
    """Argument outside the domain where an operation is defined."""


class InfeasibleError(DomainError):
    """Empty constraint set in a minimization problem."""


class SamplerError(LevyExitError, ValueError):
    """A sampler cannot be constructed (e.g. zero mass to sample from)."""


class ConfigurationError(LevyExitError, ValueError):
    """Simulation or sweep configuration is inconsistent."""


class EstimationError(LevyExitError, RuntimeError):
    """Too little data to form an estimate."""
