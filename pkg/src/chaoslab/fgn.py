"""Fractional Gaussian noise and the exact law of its normalized quadratic variation.

The statistic studied throughout the package is

    F_n = (n v_n)^{-1/2} * sum_{k=0}^{n-1} (xi_k^2 - 1)

where ``xi`` is fractional Gaussian noise with Hurst index ``h``. Writing
``xi = R^{1/2} W`` with ``R`` the Toeplitz Gram matrix shows that
``F_n = sum_i lam_i (W_i^2 - 1)`` with ``lam = eig(R) / sqrt(n v_n)``, so the
spectrum of ``R`` is a complete description of the law of ``F_n``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from ._validation import check_hurst, check_positive_int
from .exceptions import EigenFailure

NORMALIZATION_TOL = 1e-10
CLAMP_REL = 1e-12


@dataclass(frozen=True)
class FgnSpec:
    """Hurst index ``h`` and number of increments ``n`` defining ``F_n``."""

    h: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "h", check_hurst(self.h))
        object.__setattr__(self, "n", check_positive_int(self.n, "n"))


def rho(h, k):
    """Autocovariance of unit-step fractional Gaussian noise at lag ``k``.

    Vectorized over ``k``; negative lags are folded by symmetry.
    """
    h = check_hurst(h)
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * h
    out = 0.5 * (np.abs(k + 1.0) ** two_h + np.abs(k - 1.0) ** two_h - 2.0 * k ** two_h)
    if out.ndim == 0:
        return float(out)
    return out


def vn(spec: FgnSpec) -> float:
    """Variance normalizer making ``E[F_n^2] = 1``.

    Uses the Toeplitz collapse ``(2/n) sum_{k,l} rho(k-l)^2
    = 2 [1 + 2 sum_{m=1}^{n-1} (1 - m/n) rho(m)^2]``, which is O(n).
    """
    n = spec.n
    if n == 1 or spec.h == 0.5:
        return 2.0
    m = np.arange(1, n, dtype=float)
    r = rho(spec.h, m)
    return 2.0 * (1.0 + 2.0 * float(np.sum((1.0 - m / n) * r * r)))


def gram_matrix(spec: FgnSpec) -> np.ndarray:
    """Covariance matrix of ``(xi_0, ..., xi_{n-1})``."""
    return linalg.toeplitz(rho(spec.h, np.arange(spec.n, dtype=float)))


def _toeplitz_eigvalsh(R):
    # symmetric Toeplitz matrices are centrosymmetric; for even order the
    # spectrum splits into the spectra of two half-size blocks A +/- J B
    n = R.shape[0]
    if n < 64 or n % 2:
        return linalg.eigh(R, eigvals_only=True, check_finite=False)
    m = n // 2
    A = R[:m, :m]
    JB = R[m:, :m][::-1, :]
    even = linalg.eigh(A + JB, eigvals_only=True, check_finite=False)
    odd = linalg.eigh(A - JB, eigvals_only=True, check_finite=False)
    return np.sort(np.concatenate([even, odd]))


@dataclass(frozen=True, eq=False)
class SecondChaosSpectrum:
    """Eigenvalues ``lam`` such that the law is that of ``sum lam_i (W_i^2 - 1)``.

    ``h``, ``n`` and ``vn`` record provenance when the spectrum comes from
    :func:`spectrum`; they are ``None`` for synthetic spectra.
    """

    lambdas: np.ndarray
    h: float | None = None
    n: int | None = None
    vn: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        lam = np.sort(np.asarray(self.lambdas, dtype=float).ravel())
        if lam.size == 0:
            raise ValueError("spectrum must contain at least one eigenvalue")
        if not np.all(np.isfinite(lam)):
            raise ValueError("spectrum contains non-finite values")
        err = abs(2.0 * float(np.sum(lam * lam)) - 1.0)
        if err > NORMALIZATION_TOL:
            raise ValueError(f"spectrum is not normalized: |2 sum lam^2 - 1| = {err:.3g}")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_weights(cls, weights):
        """Rescale arbitrary nonzero weights so that ``2 sum lam^2 = 1``."""
        w = np.asarray(weights, dtype=float).ravel()
        scale = np.sqrt(2.0 * np.sum(w * w))
        if scale == 0:
            raise ValueError("weights must not all vanish")
        return cls(w / scale)

    @property
    def size(self):
        return self.lambdas.size

    @property
    def left_edge(self):
        """Lower end of the support when all eigenvalues are nonnegative, else None."""
        if self.lambdas[0] < 0:
            return None
        return -float(np.sum(self.lambdas))

    @property
    def positive_count(self):
        lam = self.lambdas
        return int(np.count_nonzero(lam > CLAMP_REL * np.max(np.abs(lam))))

    def to_dict(self):
        return {
            "h": self.h,
            "n": self.n,
            "vn": self.vn,
            "lambdas": [float(v) for v in self.lambdas],
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["lambdas"], dtype=float), h=d.get("h"), n=d.get("n"), vn=d.get("vn"))


def spectrum(spec: FgnSpec) -> SecondChaosSpectrum:
    """Exact spectrum of ``F_n`` from the eigenvalues of the Gram matrix."""
    return _spectrum(spec.h, spec.n)


@lru_cache(maxsize=128)
def _spectrum(h, n):
    spec = FgnSpec(h, n)
    v = vn(spec)
    scale = 1.0 / np.sqrt(n * v)
    if n == 1 or h == 0.5 or not np.any(rho(h, np.arange(1, n, dtype=float))):
        # white noise: the Gram matrix is the identity
        mu = np.ones(n)
    else:
        try:
            mu = _toeplitz_eigvalsh(gram_matrix(spec))
        except (linalg.LinAlgError, ValueError) as exc:
            raise EigenFailure(f"eigensolver failed for h={h}, n={n}: {exc}") from exc
        mu = np.where(mu < CLAMP_REL * np.max(np.abs(mu)), 0.0, mu)
    return SecondChaosSpectrum(mu * scale, h=h, n=n, vn=v)


def quadratic_form_kernel(spec: FgnSpec) -> np.ndarray:
    """Symmetric matrix ``A`` with ``F_n = z^T A z - tr(A)`` for ``z ~ N(0, I_n)``.

    Built from the Cholesky factor ``L`` of the Gram matrix, ``A = L^T L / sqrt(n v_n)``,
    so it shares the spectrum of ``F_n`` without going through an eigensolver.
    """
    L = linalg.cholesky(gram_matrix(spec), lower=True)
    return (L.T @ L) / np.sqrt(spec.n * vn(spec))
