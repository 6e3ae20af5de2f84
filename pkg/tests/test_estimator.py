import math

import numpy as np
import pytest
from scipy import stats
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from chaoslab import QuadraticVariationLaw


def test_params_round_trip():
    est = QuadraticVariationLaw(hurst=0.7, n_increments=32, points=4096, half_width=16.0)
    assert est.get_params() == {"hurst": 0.7, "n_increments": 32, "points": 4096, "half_width": 16.0}
    assert clone(est).get_params() == est.get_params()


def test_unfitted():
    with pytest.raises(NotFittedError):
        QuadraticVariationLaw().score_samples([[0.0]])


def test_fit_sets_attributes():
    est = QuadraticVariationLaw(hurst=0.5, n_increments=8).fit()
    assert est.spectrum_.n == 8
    assert est.report_.n == 8
    assert est.density_.mass == pytest.approx(1.0, abs=1e-6)


def test_score_samples_matches_chi_square():
    n = 6
    est = QuadraticVariationLaw(hurst=0.5, n_increments=n).fit()
    x = np.array([[-1.0], [0.0], [0.7], [2.5]])
    c = math.sqrt(2 * n)
    want = np.log(c * stats.chi2.pdf(c * x[:, 0] + n, n))
    assert np.allclose(est.score_samples(x), want, atol=1e-4)
    assert est.score(x) == pytest.approx(want.sum(), abs=1e-3)


def test_outside_support():
    est = QuadraticVariationLaw(hurst=0.5, n_increments=2).fit()
    assert est.score_samples([[-5.0]])[0] == -np.inf


def test_rejects_multiple_features():
    est = QuadraticVariationLaw(n_increments=4).fit()
    with pytest.raises(ValueError):
        est.score_samples(np.zeros((3, 2)))


def test_sample_shape_moments_and_seed():
    est = QuadraticVariationLaw(hurst=0.7, n_increments=64).fit()
    a = est.sample(200_000, random_state=0)
    assert a.shape == (200_000, 1)
    assert np.array_equal(a, est.sample(200_000, random_state=0))
    f = a[:, 0]
    assert abs(f.mean()) < 4 / math.sqrt(f.size)
    assert abs((f ** 2).mean() - 1) < 4 * (f ** 2).std() / math.sqrt(f.size)
    assert stats.kstest(f, lambda x: est.density_.cdf(x)).pvalue > 1e-3
