"""Exception types shared across the package."""


class LengthError(ValueError):
    """A payload, block or field has an out-of-range length."""


class AuthFailure(Exception):
    """MIC verification failed.  Deliberately carries no detail."""

    def __init__(self) -> None:
        super().__init__("authentication failed")


class ConfigurationError(ValueError):
    """Benchmark or engine configuration cannot be honoured."""


class MeasurementError(ValueError):
    """A timing value makes a derived metric undefined."""
