class KrselError(Exception):
    """Base class for errors raised by krsel."""


class ConfigError(KrselError, ValueError):
    """Invalid prior, experiment configuration or estimator parameter."""


class NumericalError(KrselError, ArithmeticError):
    """A linear solve or other numerical step failed irrecoverably."""

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            details = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class SimulationError(KrselError, RuntimeError):
    """Simulator output could not be made finite."""
