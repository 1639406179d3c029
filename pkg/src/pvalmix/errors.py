"""Exception hierarchy. The CLI maps these onto exit codes."""


class PvalmixError(Exception):
    pass


class DomainError(PvalmixError, ValueError):
    """An argument lies outside the support of a density or CDF."""


class DataError(PvalmixError):
    """The input data cannot support the requested estimate."""


class TooFewObservations(DataError):
    pass


class UninformativeData(DataError):
    """Every observation has likelihood 1 under every parameter value."""


class NumericalFailure(PvalmixError):
    """A fit produced a non-finite likelihood; ``trace`` holds the values so far."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
