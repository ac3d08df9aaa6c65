"""Exception types raised across the package."""


class OccupancyMpcError(Exception):
    """Base class for all package errors."""


class InvalidArgument(OccupancyMpcError, ValueError):
    pass


class DegeneratePosterior(OccupancyMpcError, ArithmeticError):
    """A Bayes update produced a density that integrates to (numerically) zero."""


class FormatError(OccupancyMpcError, ValueError):
    pass


class DimensionMismatch(OccupancyMpcError, ValueError):
    pass


class ParseError(OccupancyMpcError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidGeometry(OccupancyMpcError, ValueError):
    pass


class SingularCapacitance(OccupancyMpcError, ValueError):
    pass


class SolverFailure(OccupancyMpcError, RuntimeError):
    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class ConfigError(OccupancyMpcError, ValueError):
    pass
