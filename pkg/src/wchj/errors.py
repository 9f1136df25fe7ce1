"""Exception types shared across the package.

Validation errors carry the first violated condition and its indices so a
failed run can point at the offending entry instead of a generic message.
"""

from __future__ import annotations


class WchjError(Exception):
    """Base class for all package errors."""


class NonFiniteError(WchjError):
    """An input or intermediate array contains NaN or Inf."""


class SignViolation(WchjError):
    """Off-diagonal coupling entry is positive."""

    def __init__(self, i: int, j: int, value: float):
        self.i, self.j, self.value = i, j, value
        super().__init__(f"off-diagonal entry b[{i},{j}] = {value:.6g} must be <= 0")


class RowSumViolation(WchjError):
    """A coupling row sums to a negative value."""

    def __init__(self, i: int, value: float):
        self.i, self.value = i, value
        super().__init__(f"row {i} sums to {value:.6g}, must be >= 0")


class NegativeTimeError(WchjError):
    """Exponential weight requested at a negative time."""


class ShapeMismatchError(WchjError):
    """Two grid fields do not share grid and component count."""


class OutOfDomainError(WchjError):
    """Point evaluation outside a bounded grid without an extension."""


class WindowBoundaryTouched(WchjError):
    """A minimizing foot landed on the search-window edge.

    This means the configured velocity bound is too small for the data; the
    step value at the flagged nodes cannot be trusted.
    """

    def __init__(self, count: int, worst: tuple):
        self.count = count
        self.worst = worst
        super().__init__(
            f"argmin touched the search window edge at {count} (component, node) "
            f"pairs, e.g. {worst}; increase the velocity bound"
        )


class StepTooLarge(WchjError):
    """Linearized coupling weight Id - t*B would lose its sign structure."""


class CflViolation(WchjError):
    """Requested reference time step violates the CFL restriction."""


class SearchWindowTooSmall(WchjError):
    """Inner maximizer of a conjugate search touched the velocity window."""


class InsufficientTimeLevels(WchjError):
    """A residual audit needs at least three equally spaced time levels."""


class ConfigError(WchjError):
    """Run-configuration file is malformed or contains unknown keys."""
