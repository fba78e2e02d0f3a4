"""Shared exception types."""


class NumericalError(RuntimeError):
    """Training or attack arithmetic left the finite range.

    Carries the step index at which the failure was detected, and for the
    reconstruction loop the last finite parameter state.
    """

    def __init__(self, message, step=None, last_state=None):
        super().__init__(message)
        self.step = step
        self.last_state = last_state


class ConfigError(ValueError):
    """Invalid or unknown experiment-configuration content."""
