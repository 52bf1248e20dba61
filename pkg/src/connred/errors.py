"""Exception hierarchy shared by every connred module."""


class ConnredError(Exception):
    """Base class for all library errors."""


class SymexprError(ConnredError):
    pass


class UnknownVariable(SymexprError):
    pass


class UnboundVariable(SymexprError):
    pass


class EvaluationDomainError(SymexprError):
    pass


class ParseError(SymexprError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ChartMismatch(ConnredError):
    pass


class SingularHessian(ConnredError):
    pass


class LinearSolveFailure(ConnredError):
    pass


class SymmetryRequired(ConnredError):
    pass


class UnsupportedConnection(ConnredError):
    pass


class NonInvertibleVelocityMap(ConnredError):
    pass


class InvalidFlow(ConnredError):
    pass


class StepLimitExceeded(ConnredError):
    pass


class IllConditionedHessian(ConnredError):
    pass


class SpanMismatch(ConnredError):
    pass


class ProblemFileError(ConnredError):
    pass
