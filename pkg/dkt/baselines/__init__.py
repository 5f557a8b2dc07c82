"""Comparison models for the transfer task."""

from .base import BaseRegressor
from .gp import GPRegressor, gp_fit, gp_predict
from .latent_stage import LatentStageModel, latent_stage_fit
from .univariate import UnivariateRegressor, linear_fit, spline_fit

__all__ = [
    "BaseRegressor",
    "GPRegressor",
    "LatentStageModel",
    "UnivariateRegressor",
    "gp_fit",
    "gp_predict",
    "latent_stage_fit",
    "linear_fit",
    "spline_fit",
]
