"""Exception hierarchy shared by all fractal_lab modules."""


class FractalLabError(Exception):
    """Base class for every error raised by fractal_lab."""


class InvalidArgument(FractalLabError, ValueError):
    pass


class DegenerateCurveError(FractalLabError, ValueError):
    pass


class CapacityError(FractalLabError, MemoryError):
    """Requested sample would exceed the configured memory budget."""


class UnsupportedParameter(FractalLabError, ValueError):
    pass


class SolverFailure(FractalLabError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DegenerateCutoffError(FractalLabError, ValueError):
    """No Monte Carlo candidate passed the loop-soup cutoffs."""


class ContourError(FractalLabError, RuntimeError):
    """Contour tracing failed on a degenerate raster; try a finer mesh."""
