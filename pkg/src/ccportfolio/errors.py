"""Exception hierarchy shared by every module."""


class PortfolioError(Exception):
    """Base class for all errors raised by ccportfolio."""


class InputError(PortfolioError):
    """Bad user input: malformed files, inconsistent dimensions, bad config."""


class CsvFormatError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MisalignedSeries(InputError):
    pass


class NonPositivePrice(InputError):
    pass


class DegenerateSample(InputError):
    pass


class InvalidModel(InputError):
    pass


class InvalidWeights(InputError):
    pass


class MissingMeanBounds(InvalidModel):
    pass


class MissingStd(InvalidModel):
    pass


class NonConvexSurrogate(PortfolioError):
    """Raised when a surrogate quadratic constraint fails the PSD gate."""


class DimensionMismatch(InputError):
    pass


class NonConvexRejected(PortfolioError):
    """Raised by the solver when handed a program with an indefinite matrix."""


class InvalidDistribution(InputError):
    pass
