"""Spatial wind field interpolation with adaptive random Fourier features."""

__version__ = "0.1.0"

from .data_model import Station, TimeSlice, parse_observations, serialize_observations
from .errors import (
    ConfigError,
    DataError,
    DegenerateGeometryError,
    DomainError,
    IllPosedError,
    NumericError,
    ParseError,
    WindFieldError,
)
from .evaluation import QualityReport, aggregate, paired_difference, score_slices
from .fourier_series import GridSpec, train_fourier_series
from .rff import RffHyperparams, train
from .spectral import LossParams, SpectralModel, solve_coefficients

__all__ = [
    "ConfigError", "DataError", "DegenerateGeometryError", "DomainError", "GridSpec", "IllPosedError",
    "LossParams", "NumericError", "ParseError", "QualityReport", "RffHyperparams", "SpectralModel",
    "Station", "TimeSlice", "WindFieldError", "aggregate", "paired_difference", "parse_observations",
    "score_slices", "serialize_observations", "solve_coefficients", "train", "train_fourier_series",
]
