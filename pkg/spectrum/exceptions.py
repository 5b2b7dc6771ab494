"""Exception roots shared by every app, plus the spectrum-specific errors."""


class SleLabError(Exception):
    """Base class for all lab errors."""

    exit_code = 3


class ParameterError(SleLabError, ValueError):
    """Invalid input; reported as a validation failure."""

    exit_code = 2


class NumericalGuardError(SleLabError, ArithmeticError):
    """A numerical guard fired on otherwise valid input."""

    exit_code = 3


class ZetaOutOfRange(ParameterError):
    pass


class Unclassified(ParameterError):
    """The cumulative weight lies below every regime of the boundary phase diagram."""


class GammaPole(NumericalGuardError):
    pass


class NoPositiveRegion(NumericalGuardError):
    """d(beta) is negative everywhere the root finder looked."""


class MuCNonpositiveWarning(UserWarning):
    pass
