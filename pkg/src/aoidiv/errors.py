"""Exception types shared across the package."""


class InvalidScenarioError(ValueError):
    """A scenario (or one of its derived quantities) cannot be built."""


class ConfigError(InvalidScenarioError):
    """A configuration field is missing, malformed or out of range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NonConvergenceError(RuntimeError):
    """An iterative numerical routine hit its iteration cap."""

    def __init__(self, message, span_trace=None, residual=None):
        super().__init__(message)
        self.span_trace = list(span_trace) if span_trace is not None else []
        self.residual = residual
