"""Exception hierarchy shared by all nomaqam modules.

Two families matter to callers: ``ValidationError`` means the input was bad
(CLI exit code 2), ``InvariantViolation`` means an internal guarantee was
broken, which is always a bug (CLI exit code 3).
"""


class NomaQamError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(NomaQamError):
    """Invalid user-supplied input or configuration."""


class InvariantViolation(NomaQamError):
    """A proven property failed; indicates an implementation bug."""


class BothZero(ValidationError):
    """Fraction constructed with numerator and denominator both zero."""


class BoundTooLarge(ValidationError):
    """Requested punched Farey sequence exceeds the enumeration cap."""


class SilentUser(ValidationError):
    """Operation requires both users active but a constellation size is 1."""


class NotADivisor(ValidationError):
    """Constellation split does not divide the sum-constellation size."""


class ConfigInvalid(ValidationError):
    """Simulation configuration failed validation."""


class PropertyViolation(InvariantViolation):
    """A punched-Farey structural identity failed on a sequence."""


class SuperiorityViolated(InvariantViolation):
    """The proven strict distance advantage over orthogonal access failed."""
