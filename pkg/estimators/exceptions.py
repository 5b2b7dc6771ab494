from spectrum.exceptions import NumericalGuardError, ParameterError


class InsufficientSurvivors(NumericalGuardError):
    """Too few simulated paths reached the requested radial time."""


class DegenerateFit(NumericalGuardError):
    pass


class ResolutionExceeded(ParameterError):
    """The box scale e^-n is below the resolution of the time step."""
