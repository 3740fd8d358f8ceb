"""DeepFMEA: FMEA-structured condition monitoring with cost-aware thresholds."""

from ._kernels import backend
from .errors import DeepFMEAError
from .store import Store

__version__ = "0.1.0"

__all__ = ["DeepFMEAError", "Store", "backend", "__version__"]
