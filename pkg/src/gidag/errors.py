"""Exception types shared across the package."""


class GidagError(Exception):
    """Base class for all package errors."""


class MalformedGraphError(GidagError, ValueError):
    pass


class InvalidQueryError(GidagError, ValueError):
    pass


class ValidityError(GidagError, ValueError):
    """An intervention produces a cyclic post-intervention graph."""


class CorruptedStateError(GidagError, RuntimeError):
    pass


class NoEdgeError(GidagError, ValueError):
    pass


class NotEquivalentError(GidagError, ValueError):
    pass


class CapacityError(GidagError, RuntimeError):
    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class HyperparameterError(GidagError, ValueError):
    pass


class NumericError(GidagError, ArithmeticError):
    pass


class DataError(GidagError, ValueError):
    pass
