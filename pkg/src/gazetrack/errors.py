"""Exception hierarchy shared by every stage of the pipeline."""


class GazeTrackError(Exception):
    """Base class for all errors raised by gazetrack."""


class InvalidShape(GazeTrackError, ValueError):
    pass


class InvalidParameter(GazeTrackError, ValueError):
    pass


class AmbiguousOrder(GazeTrackError, ValueError):
    """Two fixations of one record share a start timestamp."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class FormatError(GazeTrackError, ValueError):
    pass


class ParseError(GazeTrackError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class NumericalError(GazeTrackError, ArithmeticError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
