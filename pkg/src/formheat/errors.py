"""Exception types shared across the package."""


class FormheatError(Exception):
    """Base class for all package-specific errors."""


class MeshFormatError(FormheatError):
    """Raised when a mesh file cannot be parsed.

    Carries the offending line number when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MeshInvariantError(FormheatError):
    """Raised when mesh data violates a structural invariant.

    The message names the failed check.
    """


class DegenerateGeometryError(FormheatError):
    """Zero-length edge, zero-area triangle, or similar degenerate input."""


class IrregularPointError(FormheatError):
    """Pointwise chart evaluation requested at a non-differentiability point."""


class QuadratureAccuracyError(FormheatError):
    """Adaptive integration exhausted its budget before reaching tolerance."""

    def __init__(self, message, achieved_tol=None):
        self.achieved_tol = achieved_tol
        if achieved_tol is not None:
            message = f"{message} (achieved relative tolerance {achieved_tol:.3e})"
        super().__init__(message)


class EnvelopeViolationError(FormheatError):
    """A sampled coefficient escapes its declared envelope bounds."""


class ConsistencyError(FormheatError):
    """Degree-of-freedom maps or trace injections are inconsistent."""


class SolveError(FormheatError):
    """A linear solve failed to reach the requested tolerance."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (final residual {residual:.3e})"
        super().__init__(message)


class EigenSolveError(FormheatError):
    """An eigenvalue computation broke down or missed its residual target."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (achieved residual {residual:.3e})"
        super().__init__(message)


class SizeLimitError(FormheatError):
    """Problem too large for the dense desk-scale code path."""


class OutsideTheoryError(FormheatError):
    """Parameter combination outside the supported well-posedness range."""


class UnsupportedScenarioError(FormheatError):
    """Scenario flags combine in a way the exponent catalogue does not cover."""


class ConfigError(FormheatError):
    """Run configuration file is malformed or inconsistent."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if key is not None:
            prefix.append(f"key '{key}'")
        if prefix:
            message = f"{', '.join(prefix)}: {message}"
        super().__init__(message)
