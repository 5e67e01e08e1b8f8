"""Exception types shared across the toolkit.

Two failure families matter operationally: bad configuration (caught before
any heavy numerics) and numerical breakdown inside a solver. The CLI maps
them to distinct exit codes, so library code must not blur the two.
"""

from __future__ import annotations


class EmpsenseError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(EmpsenseError):
    """Invalid scenario, phantom, or experiment description."""


class NumericalError(EmpsenseError):
    """A numerical operation failed or left its validity envelope.

    Attributes
    ----------
    condition : float | None
        1-norm condition estimate of the offending system, when available.
    """

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition
