"""Music-guided dance synthesis at desk scale: a selective-scan sequence
core, a skeleton-graph generator (music -> motion), a toy frame generator
with temporal self-consistency regularization (motion -> video), plus the
metrics, synthetic data, and CLI to exercise all of it."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DimensionError, GradCheckError,
                     InputError, VerificationError)
from .tensor import ParamStore, Tensor, grad_check, no_grad

__all__ = [
    "__version__",
    "ConfigurationError",
    "DimensionError",
    "GradCheckError",
    "InputError",
    "VerificationError",
    "ParamStore",
    "Tensor",
    "grad_check",
    "no_grad",
]
