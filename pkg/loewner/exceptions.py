from spectrum.exceptions import NumericalGuardError


class Swallowed(NumericalGuardError):
    """A boundary point reached the driver."""


class SwallowedPoint(NumericalGuardError):
    """An observable was requested at or after the swallowing time."""


class BranchFailure(NumericalGuardError):
    pass


class RightmostUndefined(NumericalGuardError):
    """The offset point used for O_t was itself swallowed."""


class NotReached(NumericalGuardError):
    """The path ended before the requested threshold."""
