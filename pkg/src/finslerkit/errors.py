"""Exception types shared across finslerkit.

Two families: definition errors (bad input files or expressions, CLI exit
code 2) and numeric precondition errors (degenerate tensors, points outside
the cone, sampling exhaustion, CLI exit code 3).
"""


class FinslerKitError(Exception):
    pass


class DefinitionError(FinslerKitError, ValueError):
    """A metric/map definition or expression could not be accepted."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ExprSyntaxError(DefinitionError):
    pass


class UnknownIdentifierError(DefinitionError):
    pass


class DimensionMismatchError(DefinitionError):
    pass


class NumericPreconditionError(FinslerKitError):
    pass


class DomainError(NumericPreconditionError, ArithmeticError):
    """An elementary function was evaluated outside its domain."""

    def __init__(self, message, subexpression=None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message} in '{subexpression}'"
        super().__init__(message)


class DegenerateTensorError(NumericPreconditionError):
    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class InvalidMetricError(NumericPreconditionError):
    pass


class ConeViolationError(NumericPreconditionError):
    pass


class SamplingExhaustedError(NumericPreconditionError):
    pass


class FinslerPreconditionError(NumericPreconditionError):
    """Averaging was requested for a structure that is not Finsler at x."""


class SingularJacobianError(NumericPreconditionError):
    pass


class QuadratureConvergenceError(NumericPreconditionError):
    """Averaging did not settle within the allowed number of doublings."""


class IllConditionedWarning(UserWarning):
    pass
