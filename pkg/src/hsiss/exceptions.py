"""Exception hierarchy shared by every stage."""


class HsissError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class CubeFormatError(HsissError):
    kind = "format"


class CubeValidationError(HsissError):
    kind = "validation"


class DimensionError(HsissError, ValueError):
    kind = "dimension"


class ModelFormatError(HsissError):
    kind = "model"


class ParameterError(HsissError, ValueError):
    kind = "parameter"


class ConvergenceError(HsissError, ArithmeticError):
    """Raised when the Jacobi eigensolver exhausts its rotation budget."""

    kind = "convergence"

    def __init__(self, message, off_diagonal_norm):
        super().__init__(message)
        self.off_diagonal_norm = off_diagonal_norm
