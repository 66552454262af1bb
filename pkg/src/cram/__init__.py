"""Constrained-rank additive models: multivariate additive regression with
functional nuclear-norm penalties, fit by smoothing and soft-thresholding
backfitting."""

from ._backend import BACKEND
from .core import (
    FitConfig,
    FittedModel,
    backfit_joint,
    backfit_per_component,
    fit,
    objective,
    penalty_value,
    predict,
    predict_raw,
    rank_path,
    stationarity_certificate,
)
from .data import Dataset, load_csv, load_model, save_model, standardize
from .smoothing import SmootherSpec, build_smoother, weight_row_at

__version__ = "0.1.0"
