"""Plotless density estimation from point-centred quarter (PCQM) distances."""
from ._jit import BACKEND
from .estimators import (
    CENSORED_ESTIMATORS,
    COMPLETE_ESTIMATORS,
    ESTIMATORS,
    DensityEstimate,
    DistanceSample,
    run_estimator,
)
from .model import CsrModel, NbdModel

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CENSORED_ESTIMATORS",
    "COMPLETE_ESTIMATORS",
    "ESTIMATORS",
    "CsrModel",
    "DensityEstimate",
    "DistanceSample",
    "NbdModel",
    "run_estimator",
    "__version__",
]
