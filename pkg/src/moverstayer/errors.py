"""Structured exceptions shared across the package."""


class MoverStayerError(Exception):
    """Base class for all package errors."""


class DimensionError(MoverStayerError):
    """Input shape inconsistent with the model dimensions."""


class DataValidationError(MoverStayerError):
    """Malformed panel data; carries the offending file row when known."""

    def __init__(self, message, row=None, subject_id=None):
        self.row = row
        self.subject_id = subject_id
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class EmptyDatasetError(MoverStayerError):
    """Operation requires a nonempty dataset."""


class HistoryError(MoverStayerError):
    """Covariate history too short for the requested horizon."""


class EnumerationBoundError(MoverStayerError):
    """Follow-up time exceeds the latent-path enumeration bound."""


class FitFailureError(MoverStayerError):
    """No optimizer start produced a finite, usable fit."""


class MStepError(FitFailureError):
    """Inner M-step solver failed; carries the iteration state."""

    def __init__(self, message, iterations=None, grad_norm=None, coef=None):
        self.iterations = iterations
        self.grad_norm = grad_norm
        self.coef = coef
        super().__init__(message)


class HessianError(MoverStayerError):
    """Negated Hessian of the log-likelihood is not positive definite."""

    def __init__(self, message, eigenvalue=None):
        self.eigenvalue = eigenvalue
        super().__init__(message)


class UsageError(MoverStayerError):
    """Malformed command-line invocation."""
