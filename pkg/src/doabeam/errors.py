"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DoabeamError(Exception):
    exit_code = 1


class UsageError(DoabeamError):
    exit_code = 2


class DataError(DoabeamError):
    """Bad input data: wrong shapes, formats, missing files."""

    exit_code = 3


class SignalLengthError(DataError):
    pass


class ShapeError(DataError):
    pass


class FormatError(DataError):
    pass


class NoSignalError(DataError):
    pass


class MissingCorpusError(DataError):
    pass


class NumericalError(DoabeamError):
    exit_code = 4


class DegenerateSteeringError(NumericalError):
    pass


class DegenerateTargetError(NumericalError):
    pass


class DecompositionError(NumericalError):
    pass


class NonConvergenceError(NumericalError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularDistanceError(NumericalError):
    pass


class UnsupportedLossError(UsageError):
    pass
