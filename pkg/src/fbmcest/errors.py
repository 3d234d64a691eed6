"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid dimensions, ranges or combinations of arguments."""


class DegeneratePilotError(ArithmeticError):
    """A pilot or pseudo-pilot is too small to divide by.

    ``subcarriers`` holds the offending subcarrier indices.
    """

    def __init__(self, message, subcarriers=()):
        super().__init__(message)
        self.subcarriers = tuple(int(p) for p in subcarriers)


class InterferenceNotApproximable(ValueError):
    """The neighbourhood of a cell carries unknown data symbols."""


class ConfigError(ValueError):
    """Bad experiment or CLI configuration."""
