"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Operands live on different delay-Doppler grids or have incompatible shapes."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class GainSingularError(ArithmeticError):
    """Path-gain inversion hit a vanishing template product.

    Raised when the delay/Doppler estimate sits so far from the integer tap
    that the separable response at the tap cell is numerically zero, so no
    gain can be recovered from that cell.
    """


class LeakageUndefinedError(ArithmeticError):
    """Leakage ratio requested at a cell whose magnitude is exactly zero."""
