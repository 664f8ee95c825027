"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid model description or run configuration.

    ``key`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalAbort(RuntimeError):
    """A propagation or optimization left its numerically safe regime."""


class UndefinedPhaseError(ValueError):
    """A phase was requested from a vanishing amplitude."""
