"""Surface heat-flux inversion toolkit.

Forward path: parametric plate-like bodies (geometry), temperature-dependent
materials, and a nonlinear transient FEM solver produce sensor-temperature
histories for imposed top-surface flux fields.  Inverse path: a stacked
ConvLSTM / LSTM / dense network trained on generated datasets reconstructs
the flux field from the sensor history and the body's height map.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    FluxinvError,
    InvertedElementError,
    SolverError,
    StateError,
    TrainingError,
)

__all__ = [
    "ConfigurationError",
    "DimensionError",
    "DomainError",
    "FluxinvError",
    "InvertedElementError",
    "SolverError",
    "StateError",
    "TrainingError",
    "__version__",
]
