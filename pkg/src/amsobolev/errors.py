"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when ambient dimensions of inputs disagree."""


class MeasureError(ValueError):
    """Raised for invalid measure components (zero mass, degenerate patches, ...)."""


class ConfigError(ValueError):
    """Raised for malformed JSON configs. ``path`` points at the offending key."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class EvaluationError(ArithmeticError):
    """Raised when a field produces a non-finite value at a quadrature node."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CertificateError(RuntimeError):
    """Raised when a certificate is missing, failed, or internally inconsistent."""


class InvariantViolation(RuntimeError):
    """A mathematical invariant (sandwich order, certificate soundness) failed."""
