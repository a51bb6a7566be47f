"""Exception hierarchy shared by the solver modules and the CLI."""


class SolverError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SolverError, ValueError):
    """Invalid parameters, unknown config keys, malformed masks."""


class ShapeError(ConfigurationError):
    """Array lengths or sampling grids do not match."""


class UnsupportedOperationError(SolverError):
    """Operation not defined for the requested potential shape."""


class NumericalError(SolverError, ArithmeticError):
    """An eigen-solver, root finder or quadrature did not behave."""


class TuningError(NumericalError):
    """The magnitude tuner could not reach the requested binding energy."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class PoleResolutionError(NumericalError):
    """Residue of a deep-dimer pole is unstable under step refinement."""


class OracleInvalidError(NumericalError):
    """The coordinate-space oracle box is too small for the requested state."""
