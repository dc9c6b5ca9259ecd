"""Exception hierarchy. The CLI maps these onto exit codes."""


class RangeUnfoldError(Exception):
    exit_code = 4


class InvalidArgumentError(RangeUnfoldError, ValueError):
    exit_code = 3


class EmptyInputError(InvalidArgumentError):
    pass


class DegenerateAzimuthError(InvalidArgumentError):
    """Raised for a point on the sensor axis (x = y = 0)."""


class AmbiguousAxisError(InvalidArgumentError):
    """Raised when a rotation of exactly pi has no unique rotation vector."""


class UnrepairableRingsError(RangeUnfoldError):
    exit_code = 4


class CorruptedLUTError(RangeUnfoldError):
    exit_code = 4


class InvariantViolation(RangeUnfoldError):
    exit_code = 4


class FormatError(RangeUnfoldError):
    exit_code = 2
