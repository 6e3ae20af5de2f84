"""Estimator-style wrapper around the exact law of the normalized quadratic variation."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array, check_random_state
from sklearn.utils.validation import check_is_fitted

from .analytics import DEFAULT_HALF_WIDTH, DEFAULT_POINTS, density
from .fgn import FgnSpec, spectrum
from .metrics import distance_report

_TINY = np.finfo(float).tiny


class QuadraticVariationLaw(BaseEstimator):
    """Exact law of ``F_n`` for fGn with Hurst index ``hurst`` and ``n_increments`` terms.

    Nothing is learned from data: :meth:`fit` computes the spectrum, the
    density grid and the distance report. The interface mirrors
    :class:`sklearn.neighbors.KernelDensity`.

    Attributes
    ----------
    spectrum_ : SecondChaosSpectrum
    density_ : DensityGrid
    report_ : DistanceReport
    """

    def __init__(self, hurst=0.5, n_increments=64, points=DEFAULT_POINTS, half_width=DEFAULT_HALF_WIDTH):
        self.hurst = hurst
        self.n_increments = n_increments
        self.points = points
        self.half_width = half_width

    def fit(self, X=None, y=None):
        """Compute the law; ``X`` and ``y`` are ignored."""
        spec = FgnSpec(self.hurst, self.n_increments)
        self.spectrum_ = spectrum(spec)
        self.density_ = density(self.spectrum_, self.half_width, self.points)
        self.report_ = distance_report(self.density_, r_values=(1, 2), h=spec.h, n=spec.n)
        return self

    def score_samples(self, X):
        """Log density at each row of ``X`` (shape ``(n_samples, 1)``)."""
        check_is_fitted(self, "density_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected one feature, got {X.shape[1]}")
        p = self.density_.pdf(X[:, 0])
        with np.errstate(divide="ignore"):
            return np.where(p > 0, np.log(np.maximum(p, _TINY)), -np.inf)

    def score(self, X, y=None):
        """Total log-likelihood of ``X``."""
        return float(np.sum(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        """Draw ``n_samples`` exact realizations, shape ``(n_samples, 1)``."""
        check_is_fitted(self, "spectrum_")
        rng = check_random_state(random_state)
        lam = self.spectrum_.lambdas
        w = rng.standard_normal((n_samples, lam.size))
        return ((w * w - 1.0) @ lam)[:, None]
