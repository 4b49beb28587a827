"""Exception types shared across the package."""


class IntegrationFailure(RuntimeError):
    """Raised when the adaptive time stepper cannot complete a run.

    Carries the time at which integration broke down, when known.
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class ConfigError(ValueError):
    """Raised for malformed or invalid run configuration input."""
