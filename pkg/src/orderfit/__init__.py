"""Probability-plot regression with exact order-statistic weights."""
from .fitcore import (
    FitMethod,
    FitResult,
    bootstrap_se,
    efficiency,
    fit,
    fit_gls_full,
    fit_ml,
    fit_wls,
    ml_asymptotics,
)
from .params import DistributionKind, DistributionParams, LocScaleParams, PlottingScheme
from .resweights import MomentMethod, mc_covariance, moment_table

__version__ = "0.1.0"

__all__ = [
    "DistributionKind",
    "DistributionParams",
    "FitMethod",
    "FitResult",
    "LocScaleParams",
    "MomentMethod",
    "PlottingScheme",
    "bootstrap_se",
    "efficiency",
    "fit",
    "fit_gls_full",
    "fit_ml",
    "fit_wls",
    "mc_covariance",
    "ml_asymptotics",
    "moment_table",
]
