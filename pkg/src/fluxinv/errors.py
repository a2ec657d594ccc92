"""Exception types shared across the package."""


class FluxinvError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(FluxinvError, ValueError):
    """Array shapes or grid dimensions are inconsistent."""


class ConfigurationError(FluxinvError, ValueError):
    """A configuration value is missing, malformed, or out of range."""


class DomainError(FluxinvError, ValueError):
    """An input is outside the physical domain of an operation (e.g. T <= 0)."""


class InvertedElementError(FluxinvError, ValueError):
    """A finite element has a non-positive Jacobian determinant."""


class SolverError(FluxinvError, RuntimeError):
    """The nonlinear or linear solver failed to converge.

    Attributes carry diagnostics where available: ``residual_norm`` for
    Newton failures, ``step_index`` for transient marches.
    """

    def __init__(self, message, residual_norm=None, step_index=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.step_index = step_index


class TrainingError(FluxinvError, RuntimeError):
    """Training diverged or produced invalid gradients."""


class StateError(FluxinvError, RuntimeError):
    """An operation was called before its required state existed."""
