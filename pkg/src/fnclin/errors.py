"""Exception hierarchy shared across the package.

Validation problems (bad inputs, malformed files) are ValueError subclasses
so the CLI can map them to exit code 1; numerical/runtime failures map to 2.
"""


class ValidationError(ValueError):
    """Invalid input data: parameter out of range, mismatched vectors, bad file."""


class SimulationError(RuntimeError):
    """Numerical integration failed (non-finite state)."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class ReductionError(RuntimeError):
    """The second-order closed form does not apply (overdamped or degenerate)."""


class UndampedSystemError(RuntimeError):
    """No online regulation resource and zero damping: no equilibrium recovery."""


class MonotonicityError(RuntimeError):
    """Nadir magnitude decreased with increasing disturbance during bracketing."""


class FitError(RuntimeError):
    """LP solve or piecewise-linear training failed."""
