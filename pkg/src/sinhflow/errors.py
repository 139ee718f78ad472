"""Exception hierarchy shared by all modules.

The CLI maps ``ValidationError`` and ``DomainError`` to exit code 1 and
``SolverError`` to exit code 2.
"""


class SinhFlowError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SinhFlowError, ValueError):
    """Bad input: wrong shape, non-finite values, inadmissible parameters."""


class FieldError(ValidationError):
    """A field contains NaN/Inf or has the wrong shape."""


class SolvabilityError(ValidationError):
    """Poisson right-hand side with nonzero mean."""

    def __init__(self, mean):
        self.mean = mean
        super().__init__(f"Poisson right-hand side has nonzero mean {mean:.3e}; "
                         "the equation is not solvable on the torus")


class ParameterError(ValidationError):
    """A construction parameter falls outside its admissible window."""


class DomainError(SinhFlowError, ValueError):
    """A weighted mass degenerated to zero so a logarithm is undefined."""

    def __init__(self, which, value):
        self.which = which
        self.value = value
        super().__init__(f"weighted mass {which} = {value!r} is not positive")


class SolverError(SinhFlowError, RuntimeError):
    """An iterative solver or the time stepper failed."""
