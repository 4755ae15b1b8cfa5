class DEQLError(Exception):
    """Base class for all errors raised by this package."""


class DataError(DEQLError):
    pass


class ParseError(DataError):
    def __init__(self, message, lineno=None):
        super().__init__(message)
        self.lineno = lineno


class HyperparameterError(DEQLError, ValueError):
    pass


class PreconditionError(DEQLError):
    """Input violates a solver precondition, e.g. an item with no interactions."""


class NotPositiveDefiniteError(DEQLError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class SingularUpdateError(DEQLError):
    """Rank-1 inverse update with a (near-)zero denominator."""


class ModelFormatError(DEQLError):
    pass
