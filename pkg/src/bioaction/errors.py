"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or inconsistent configuration."""


class DimensionError(ValueError):
    """Array shapes incompatible with the requested operation."""


class DegenerateInputError(ValueError):
    """Input carries no usable information (e.g. a constant pattern)."""


class SingularityError(ValueError):
    """A matrix that must be inverted is singular or too ill-conditioned."""


class InstabilityError(RuntimeError):
    """Numerical integration diverged."""


class InsufficientDataError(ValueError):
    """Not enough samples to fit or train."""


class DatasetError(ValueError):
    """Dataset manifest or frame files could not be loaded.

    ``report`` lists the individual problems found.
    """

    def __init__(self, message, report=()):
        super().__init__(message)
        self.report = list(report)
