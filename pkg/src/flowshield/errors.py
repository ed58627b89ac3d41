"""Exception hierarchy shared by every module.

The CLI maps ``DataError`` subclasses to exit code 2 and ``NumericalError``
subclasses to exit code 3.
"""


class FlowshieldError(Exception):
    """Base class for all package errors."""


class DataError(FlowshieldError):
    """Input data violates a precondition (schema, arity, class balance)."""


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyTableError(DataError):
    pass


class DegenerateTableError(DataError):
    pass


class ArityError(DataError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class NotCompilableError(FlowshieldError):
    pass


class NumericalError(FlowshieldError):
    """A numerical procedure failed (non-convergence, unlearnable data)."""


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, last_iterate=None, iterations: int = 0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class UnlearnableError(NumericalError):
    pass
