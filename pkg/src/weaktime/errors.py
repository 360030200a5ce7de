"""Exception types raised across the package.

Each class also derives from the closest builtin so callers can catch
``ValueError`` etc. without importing this module.
"""


class WeakTimeError(Exception):
    """Base class for all package errors."""


class DimensionError(WeakTimeError, ValueError):
    pass


class AliasingError(WeakTimeError, ValueError):
    """A pulse envelope is not contained in the time window."""


class DegenerateStateError(WeakTimeError, ValueError):
    pass


class DomainError(WeakTimeError, ValueError):
    pass


class UndefinedWeakValueError(WeakTimeError, ArithmeticError):
    """Post-selection probability density is below the numerical floor."""


class NoCountsError(WeakTimeError, ArithmeticError):
    pass


class InsufficientSignalError(WeakTimeError, ArithmeticError):
    pass


class InsufficientFringeError(WeakTimeError, ValueError):
    pass


class HermiticityError(WeakTimeError, ArithmeticError):
    """A reconstructed operator is not Hermitian within tolerance."""


class MemoryCapError(WeakTimeError, MemoryError):
    pass


class ConfigError(WeakTimeError, ValueError):
    pass
