"""Exception types raised by the solvers and the config layer."""


class RobustShapeError(Exception):
    """Base class; ``exit_code`` is used by the command line front end."""

    exit_code = 1


class NonConvergence(RobustShapeError):
    exit_code = 3

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IllConditioned(NonConvergence):
    exit_code = 4


class DegenerateState(RobustShapeError):
    exit_code = 5


class StateNotConverged(RobustShapeError):
    exit_code = 6

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class Stalled(RobustShapeError):
    exit_code = 7


class ParseError(RobustShapeError):
    exit_code = 8

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ValidationError(RobustShapeError):
    exit_code = 9

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
