"""Exception types shared across the toolkit."""


class StructuralError(ValueError):
    """A contract violation: mismatched spaces, marginals or junctions."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ConvergenceError(RuntimeError):
    """An iterative solve failed to converge; carries the residual ladder."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class PolygonStuckError(StructuralError):
    """Euler polygon found no admissible (direction, step) at some position.

    Carries the stuck position: this is falsification evidence against the
    input function's claimed stability, never a silent failure.
    """

    def __init__(self, message, *, step, time, best_margin, **details):
        super().__init__(message, step=step, time=time, best_margin=best_margin, **details)
        self.step = step
        self.time = time
        self.best_margin = best_margin
