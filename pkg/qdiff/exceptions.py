from spectrum.exceptions import ParameterError


class ParameterOutOfRange(ParameterError):
    """The Jacobi dimensions delta_+ and delta_- must both be positive."""


class TruncationWarning(UserWarning):
    pass
