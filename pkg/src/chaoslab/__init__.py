"""Exact and Monte Carlo analysis of the normalized quadratic variation of fractional Gaussian noise."""
from .analytics import CumulantSet, DensityGrid, char_fn, cumulants, density
from .chaos import (
    ChaosExpansion,
    SymmetricTensor,
    contract,
    evaluate,
    fourth_cumulant,
    hermite,
    malliavin_derivative,
    product_formula,
    symmetrize,
    third_cumulant,
)
from .estimator import QuadraticVariationLaw
from .exceptions import (
    ChaosLabError,
    DimensionMismatch,
    EigenFailure,
    EmbeddingFailure,
    GridTooCoarse,
    InsufficientData,
    NotPureChaos,
    QuadratureFailure,
    RankError,
)
from .experiments import RateTable, SlopeFit, cmd_density, cmd_rates, cmd_verify, fit_slope
from .fgn import FgnSpec, SecondChaosSpectrum, gram_matrix, rho, spectrum, vn
from .metrics import (
    DistanceReport,
    de_bruijn_entropy,
    distance_report,
    fisher_excess,
    gaussian_smoothed_density,
    lr_distance,
    relative_entropy,
    shimizu_check,
    sup_distance,
    tv_distance,
)
from .montecarlo import (
    McConfig,
    McEstimate,
    carbery_wright,
    neg_moment,
    sample_DF_norm_sq,
    sample_fgn,
    sample_Fn,
    stein_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ChaosExpansion", "ChaosLabError", "CumulantSet", "DensityGrid", "DimensionMismatch",
    "DistanceReport", "EigenFailure", "EmbeddingFailure", "FgnSpec", "GridTooCoarse",
    "InsufficientData", "McConfig", "McEstimate", "NotPureChaos", "QuadraticVariationLaw",
    "QuadratureFailure", "RankError", "RateTable", "SecondChaosSpectrum", "SlopeFit",
    "SymmetricTensor", "carbery_wright", "char_fn", "cmd_density", "cmd_rates", "cmd_verify",
    "contract", "cumulants", "de_bruijn_entropy", "density", "distance_report", "evaluate",
    "fisher_excess", "fit_slope", "fourth_cumulant", "gaussian_smoothed_density", "gram_matrix",
    "hermite", "lr_distance", "malliavin_derivative", "neg_moment", "product_formula",
    "relative_entropy", "rho", "sample_DF_norm_sq", "sample_Fn", "sample_fgn", "shimizu_check",
    "spectrum", "stein_bound", "sup_distance", "symmetrize", "third_cumulant", "tv_distance", "vn",
]
