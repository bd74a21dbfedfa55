"""Exception types raised by the library."""


class QLSError(Exception):
    """Base class for all library errors."""


class NumericInputError(QLSError, ValueError):
    """A field or argument carries non-finite or otherwise unusable numbers."""


class GridMismatchError(QLSError, ValueError):
    """Two objects that must share a grid do not."""


class DimensionError(QLSError, ValueError):
    """A coordinate vector or shift has the wrong number of components."""


class UnsupportedModeError(QLSError, ValueError):
    """The operation is undefined for the grid's boundary mode."""


class DegenerateWindowError(QLSError, ValueError):
    """A local-mass window is smaller than one grid cell."""


class NoMaximizerError(QLSError, ArithmeticError):
    """The fiber map has no finite maximizer (zero coupling or zero state)."""


class BracketError(QLSError, ArithmeticError):
    """Geometric bracketing of the fiber derivative sign change failed."""


class ConfigError(QLSError, ValueError):
    """Invalid run configuration.

    ``line`` is the 1-based line number for syntax errors, else ``None``.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SolveError(QLSError, RuntimeError):
    """A solve ended without convergence; ``report`` holds progress so far."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StalledError(SolveError):
    """The line search could not decrease the energy."""


class VanishingError(SolveError):
    """The coupling integral collapsed to zero (vanishing scenario)."""


class TruncationWarning(UserWarning):
    """Fiber rescaling pushed a noticeable share of mass out of the box."""
