"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration (unknown key, bad grid, missing file)."""


class DomainError(ValueError):
    """Parameters lie outside the validity region of a formula."""


class CapacityError(RuntimeError):
    """The requested computation exceeds a configured size cap."""


class AccuracyError(RuntimeError):
    """A numerical routine could not reach its requested tolerance.

    Carries the achieved residual so callers can decide whether to retry
    with looser settings.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual
