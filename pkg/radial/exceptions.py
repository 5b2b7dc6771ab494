class ClockStallWarning(UserWarning):
    """The radial clock did not advance over one or more steps."""


class StepRejectedWarning(UserWarning):
    """Too many steps of Q~ were held at the q floor."""
