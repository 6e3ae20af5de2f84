"""Exact fractional Gaussian noise sampling and Monte Carlo estimators.

Paths come from circulant embedding of the fGn covariance (Davies-Harte);
each complex FFT yields two independent paths. Batches draw from independent
Philox substreams keyed by ``(seed, batch_index)``, so results do not depend
on how batches are scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from ._validation import check_positive_int
from .exceptions import EmbeddingFailure
from .fgn import FgnSpec, gram_matrix, rho, spectrum, vn

NEG_EIG_TOL = 1e-9
TAIL_SHARE = 0.001
MAX_NEG_POWER = 8.0


@dataclass(frozen=True)
class McConfig:
    """Sample count, 64-bit seed, batch size and number of worker threads."""

    samples: int = 1_000_000
    seed: int = 0
    batch: int = 10_000
    n_jobs: int = 1

    def __post_init__(self):
        check_positive_int(self.samples, "samples", 1000)
        check_positive_int(self.batch, "batch")
        check_positive_int(self.n_jobs, "n_jobs")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def batch_sizes(self):
        full, rest = divmod(self.samples, self.batch)
        return [self.batch] * full + ([rest] if rest else [])

    def rng(self, batch_index):
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(batch_index),))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples_used: int
    tail_flag: bool = False

    def to_dict(self):
        return {"mean": self.mean, "se": self.std_error, "samples": self.samples_used,
                "tail_flag": self.tail_flag}


def estimate(values) -> McEstimate:
    """Sample mean with standard error and the tail-dominance flag.

    ``tail_flag`` is set when the largest 0.1% of ``|values|`` carry more than
    half of the total.
    """
    v = np.asarray(values, dtype=float).ravel()
    m = v.size
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    a = np.abs(v)
    k = max(1, int(TAIL_SHARE * m))
    total = float(np.sum(a))
    top = float(np.sum(np.partition(a, m - k)[m - k:])) if total > 0 else 0.0
    return McEstimate(mean, se, m, bool(total > 0 and top > 0.5 * total))


def _map_batches(cfg, fn):
    jobs = list(enumerate(cfg.batch_sizes()))
    if cfg.n_jobs == 1:
        for i, size in jobs:
            yield fn(cfg.rng(i), size)
        return
    with ThreadPoolExecutor(cfg.n_jobs) as pool:
        yield from pool.map(lambda job: fn(cfg.rng(job[0]), job[1]), jobs)


class CirculantSampler:
    """Exact ``N(0, R)`` sampler for the fGn Gram matrix ``R`` of ``spec``.

    The covariance row is embedded in a circulant of size ``2(n - 1)``;
    if the embedding has eigenvalues below ``-1e-9 * max`` the sampler
    falls back to a dense Cholesky factor.
    """

    def __init__(self, spec: FgnSpec):
        self.spec = spec
        n = spec.n
        self.method = "trivial" if n == 1 else "circulant"
        self._chol = None
        if n > 1:
            r = rho(spec.h, np.arange(n, dtype=float))
            row = np.concatenate([r, r[-2:0:-1]])
            eig = np.fft.rfft(row).real
            self._eig_r = eig
            self.m = row.size
            if eig.min() < -NEG_EIG_TOL * eig.max():
                self.method = "cholesky"
                self._chol = self._cholesky()
            else:
                full = np.fft.fft(row).real
                self._sqrt_eig = np.sqrt(np.clip(full, 0.0, None) / self.m)

    def _cholesky(self):
        R = gram_matrix(self.spec)
        for jitter in (0.0, 1e-12):
            try:
                return linalg.cholesky(R + jitter * np.eye(R.shape[0]), lower=True)
            except linalg.LinAlgError:
                continue
        raise EmbeddingFailure(f"neither circulant embedding nor Cholesky works for {self.spec}")

    def draw(self, rng, count):
        """Array of shape ``(count, n)`` of fGn increments."""
        n = self.spec.n
        if self.method == "trivial":
            return rng.standard_normal((count, 1))
        if self.method == "cholesky":
            return rng.standard_normal((count, n)) @ self._chol.T
        half = (count + 1) // 2
        w = rng.standard_normal((half, self.m)) + 1j * rng.standard_normal((half, self.m))
        y = np.fft.fft(w * self._sqrt_eig, axis=1)[:, :n]
        return np.concatenate([y.real, y.imag])[:count]

    def gram_apply(self, xi):
        """Rows of ``xi`` multiplied by ``R`` (Toeplitz matvec through the embedding)."""
        n = self.spec.n
        if n == 1:
            return xi.copy()
        pad = np.zeros((xi.shape[0], self.m))
        pad[:, :n] = xi
        return np.fft.irfft(np.fft.rfft(pad, axis=1) * self._eig_r, self.m, axis=1)[:, :n]


def sample_fgn(spec: FgnSpec, cfg: McConfig):
    """Yield batches of fGn increment vectors, shape ``(batch, n)``."""
    sampler = CirculantSampler(spec)
    yield from _map_batches(cfg, sampler.draw)


def _fn_and_dfnorm(spec, cfg):
    sampler = CirculantSampler(spec)
    scale = 1.0 / math.sqrt(spec.n * vn(spec))

    def work(rng, size):
        xi = sampler.draw(rng, size)
        f = scale * np.sum(xi * xi - 1.0, axis=1)
        q = 4.0 * scale * scale * np.sum(xi * sampler.gram_apply(xi), axis=1)
        return f, q

    return _map_batches(cfg, work)


def sample_Fn(spec: FgnSpec, cfg: McConfig, method="circulant"):
    """Yield batches of ``F_n`` realizations.

    ``method="circulant"`` transforms simulated paths; ``method="spectral"``
    draws ``sum lam_i (W_i^2 - 1)`` directly from the exact spectrum, which
    needs half the Gaussian draws and no FFT.
    """
    if method == "circulant":
        sampler = CirculantSampler(spec)
        scale = 1.0 / math.sqrt(spec.n * vn(spec))
        yield from _map_batches(cfg, lambda rng, size: scale * np.sum(sampler.draw(rng, size) ** 2 - 1.0, axis=1))
    elif method == "spectral":
        lam = spectrum(spec).lambdas

        def work(rng, size):
            w = rng.standard_normal((size, lam.size))
            return (w * w - 1.0) @ lam

        yield from _map_batches(cfg, work)
    else:
        raise ValueError(f"unknown sampling method {method!r}")


def sample_DF_norm_sq(spec: FgnSpec, cfg: McConfig):
    """Yield batches of ``||DF_n||^2 = (4 / (n v_n)) xi^T R xi``."""
    for _, q in _fn_and_dfnorm(spec, cfg):
        yield q


def collect(batches):
    """Concatenate a stream of batches into one array."""
    return np.concatenate(list(batches))


def neg_moments(spec: FgnSpec, powers, cfg: McConfig):
    """Estimates of ``E[||DF_n||^{-p}]`` for each ``p`` in ``powers``, from one set of paths."""
    powers = [float(p) for p in powers]
    for p in powers:
        if p < 0 or p > MAX_NEG_POWER:
            raise ValueError(f"power must lie in [0, {MAX_NEG_POWER}], got {p}")
    q = collect(sample_DF_norm_sq(spec, cfg)) if any(p > 0 for p in powers) else None
    out = {}
    for p in powers:
        if p == 0:
            out[p] = McEstimate(1.0, 0.0, cfg.samples, False)
        else:
            out[p] = estimate(q ** (-0.5 * p))
    return out


def neg_moment(spec: FgnSpec, p, cfg: McConfig) -> McEstimate:
    """Monte Carlo estimate of ``E[||DF_n||^{-p}]`` (``0 <= p <= 8``)."""
    return neg_moments(spec, [p], cfg)[float(p)]


class SteinTerms(NamedTuple):
    stein: McEstimate
    sigma_sq: McEstimate


def stein_terms(spec: FgnSpec, cfg: McConfig) -> SteinTerms:
    """``2 E|1 - ||DF||^2 / 2|`` and ``E[(1 - ||DF||^2 / 2)^2]`` from shared paths."""
    q = collect(sample_DF_norm_sq(spec, cfg))
    sigma = 1.0 - 0.5 * q
    return SteinTerms(estimate(2.0 * np.abs(sigma)), estimate(sigma * sigma))


def stein_bound(spec: FgnSpec, cfg: McConfig) -> McEstimate:
    """Monte Carlo estimate of the Stein bound ``2 E|1 - ||DF_n||^2 / 2|``."""
    return stein_terms(spec, cfg).stein


class CarberyWright(NamedTuple):
    c_hat: float
    std_error: float
    argmax: float
    samples: int


def quadratic_form_samples(A, cfg: McConfig):
    """Yield batches of ``z^T A z`` for ``z ~ N(0, I_d)``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    if A.shape != (d, d):
        raise ValueError("quadratic form matrix must be square")

    def work(rng, size):
        z = rng.standard_normal((size, d))
        return np.einsum("mi,ij,mj->m", z, A, z)

    yield from _map_batches(cfg, work)


def carbery_wright(source, cfg: McConfig, x_grid=None) -> CarberyWright:
    """Empirical Carbery-Wright constant for a degree-2 Gaussian polynomial ``Q``.

    ``c_hat = max_x P(|Q| <= x) E[|Q|]^{1/2} / (2 x^{1/2})`` over ``x_grid``.
    ``source`` is an :class:`FgnSpec` (``Q = ||DF_n||^2``), a square matrix
    ``A`` (``Q = z^T A z``) or an array of precomputed samples of ``Q``.
    """
    if x_grid is None:
        x_grid = np.logspace(-4, 0, 41)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= 0):
        raise ValueError("x_grid must be positive")
    if isinstance(source, FgnSpec):
        q = collect(sample_DF_norm_sq(source, cfg))
    else:
        arr = np.asarray(source, dtype=float)
        q = collect(quadratic_form_samples(arr, cfg)) if arr.ndim == 2 else arr.ravel()
    a = np.sort(np.abs(q))
    m = a.size
    mean_abs = float(np.mean(a))
    var_abs = float(np.var(a, ddof=1))
    probs = np.searchsorted(a, x_grid, side="right") / m
    ratios = probs * math.sqrt(mean_abs) / (2.0 * np.sqrt(x_grid))
    i = int(np.argmax(ratios))
    x, pr = float(x_grid[i]), float(probs[i])
    k = 1.0 / (2.0 * math.sqrt(x))
    var = (k * math.sqrt(mean_abs)) ** 2 * pr * (1 - pr) / m
    var += (k * pr) ** 2 * var_abs / (4.0 * mean_abs * m)
    return CarberyWright(float(ratios[i]), math.sqrt(var), x, m)
