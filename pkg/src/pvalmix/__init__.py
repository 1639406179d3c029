"""Estimate the share of false positives among published significant P-values."""

__version__ = "0.1.0"

from .em import EMConfig, EMResult, bootstrap_sd, run_em
from .errors import DataError, DomainError, NumericalFailure, PvalmixError
from .model import Censored, Exact, MixtureParams, ObservationSet, Rounded
from .numerics import BACKEND

__all__ = [
    "BACKEND", "Censored", "DataError", "DomainError", "EMConfig", "EMResult", "Exact",
    "MixtureParams", "NumericalFailure", "ObservationSet", "PvalmixError", "Rounded",
    "bootstrap_sd", "run_em",
]
