from spectrum.exceptions import ParameterError


class StepTooLarge(ParameterError):
    pass


class ForcePointCollision(ParameterError):
    """Two distinct force points start at the same place."""


class NonHittingRegimeWarning(UserWarning):
    pass
