"""Exact law of a second-chaos variable ``F = sum lam_i (W_i^2 - 1)``.

The characteristic function is available in closed form, so the density and
its derivative are recovered by FFT inversion on a uniform grid. When every
eigenvalue is positive the law lives on ``(-sum lam, inf)`` and, for few
eigenvalues, has an algebraic singularity at that edge which Fourier inversion
resolves poorly. In that case a truncated gamma-mixture series with the same
edge behaviour is subtracted in the Fourier domain and added back in closed
form, leaving a smooth remainder for the FFT.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ._validation import check_positive_int, check_power_of_two
from .exceptions import GridTooCoarse
from .fgn import SecondChaosSpectrum

DEFAULT_HALF_WIDTH = 16.0
DEFAULT_POINTS = 2 ** 16
MAX_POINTS = 2 ** 20
MIN_POINTS = 2 ** 12
MASS_TOL = 1e-4
TAIL_TOL = 1e-8
# edge subtraction is only worth it while the characteristic function decays slowly
MIXTURE_MAX_COUNT = 24
MIXTURE_MAX_TERMS = 256
_CHUNK_ELEMS = 1 << 22


def char_fn(s: SecondChaosSpectrum, t):
    """Characteristic function ``prod_i (1 - 2 i lam_i t)^{-1/2} exp(-i lam_i t)``.

    Each factor's logarithm stays on the principal branch because
    ``Re(1 - 2 i lam t) = 1``; summing the per-factor logs therefore tracks
    the product's argument continuously in ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.ravel()
    lam = s.lambdas
    out = np.empty(flat.shape, dtype=complex)
    step = max(1, _CHUNK_ELEMS // lam.size)
    for start in range(0, flat.size, step):
        tt = flat[start:start + step, None]
        z = 2j * lam[None, :] * tt
        out[start:start + step] = np.exp(np.sum(-0.5 * np.log1p(-z) - 0.5 * z, axis=1))
    out = out.reshape(t_arr.shape)
    return complex(out) if out.ndim == 0 else out


def _char_fn_decaying(s, t_pos, floor):
    # evaluate on the nonnegative half-grid, stopping once |phi| (monotone in |t|)
    # has fallen below ``floor``
    out = np.zeros(t_pos.size, dtype=complex)
    step = max(256, _CHUNK_ELEMS // s.size)
    for start in range(0, t_pos.size, step):
        vals = char_fn(s, t_pos[start:start + step])
        out[start:start + step] = vals
        if abs(vals[-1]) < floor:
            break
    return out


@dataclass(frozen=True)
class GammaMixture:
    """Law of ``sum lam_i W_i^2`` (all ``lam_i > 0``) as ``sum_k w_k Gamma(m/2 + k, 2 beta)``.

    Truncated to the leading terms; ``weights`` sum to at most one.
    """

    weights: np.ndarray
    shape0: float
    beta: float

    @classmethod
    def from_lambdas(cls, lam, max_terms=MIXTURE_MAX_TERMS, tol=1e-15):
        lam = np.asarray(lam, dtype=float)
        beta = float(np.min(lam))
        ratio = beta / lam
        gamma = 1.0 - ratio
        log_c0 = 0.5 * float(np.sum(np.log(ratio)))
        powers = np.ones_like(gamma)
        g = [0.0]
        d = [1.0]
        for k in range(1, max_terms):
            if math.fsum(d) * math.exp(log_c0) > 1.0 - tol:
                break
            powers = powers * gamma
            g.append(float(np.sum(powers)))
            d.append(sum(g[j] * d[k - j] for j in range(1, k + 1)) / (2.0 * k))
        weights = np.exp(log_c0) * np.asarray(d)
        return cls(weights, 0.5 * lam.size, beta)

    @property
    def mass(self):
        return float(np.sum(self.weights))

    def char_fn(self, t):
        psi = 1.0 / (1.0 - 2j * self.beta * np.asarray(t, dtype=float))
        acc = np.zeros_like(psi)
        for w in self.weights[::-1]:
            acc = acc * psi + w
        return acc * psi ** self.shape0

    def pdf(self, u):
        """Density and derivative at ``u`` (zero for ``u <= 0``)."""
        u = np.asarray(u, dtype=float)
        p = np.zeros_like(u)
        dp = np.zeros_like(u)
        pos = u > 0
        up = u[pos]
        theta = 2.0 * self.beta
        log_u = np.log(up / theta)
        for k, w in enumerate(self.weights):
            if w <= 0:
                continue
            a = self.shape0 + k
            logpdf = (a - 1.0) * log_u - up / theta - special.gammaln(a) - math.log(theta)
            pk = w * np.exp(logpdf)
            p[pos] += pk
            dp[pos] += pk * ((a - 1.0) / up - 1.0 / theta)
        return p, dp

    def cdf(self, u):
        u = np.maximum(np.asarray(u, dtype=float), 0.0)
        theta = 2.0 * self.beta
        return sum(w * special.gammainc(self.shape0 + k, u / theta) for k, w in enumerate(self.weights))


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density ``p`` and derivative ``dp`` sampled at ``x0 + j * dx``.

    ``left_support_edge``, ``edge_exponent`` and ``edge_coefficient`` describe
    a hard lower edge of the support near which
    ``p ~ edge_coefficient * (x - edge)^edge_exponent``.
    """

    x0: float
    dx: float
    p: np.ndarray
    dp: np.ndarray
    left_support_edge: float | None = None
    edge_exponent: float | None = None
    mass_defect: float = 0.0
    clamped_mass: float = 0.0
    edge_coefficient: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.p.size)

    @property
    def half_width(self):
        return -self.x0

    @property
    def mass(self):
        return 1.0 - self.mass_defect

    def cdf(self, x=None):
        """Cumulative distribution from trapezoid sums, optionally interpolated at ``x``."""
        c = np.concatenate([[0.0], np.cumsum(0.5 * (self.p[1:] + self.p[:-1]) * self.dx)])
        c = np.clip(c, 0.0, 1.0)
        if x is None:
            return c
        return np.interp(x, self.x, c, left=0.0, right=c[-1])

    def pdf(self, x):
        return np.interp(x, self.x, self.p, left=0.0, right=0.0)

    def to_dict(self):
        return {
            "x0": self.x0,
            "dx": self.dx,
            "p": [float(v) for v in self.p],
            "dp": [float(v) for v in self.dp],
            "left_support_edge": self.left_support_edge,
            "edge_exponent": self.edge_exponent,
            "edge_coefficient": self.edge_coefficient,
            "mass_defect": self.mass_defect,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["x0"]), float(d["dx"]),
            np.asarray(d["p"], dtype=float), np.asarray(d["dp"], dtype=float),
            d.get("left_support_edge"), d.get("edge_exponent"), float(d.get("mass_defect", 0.0)),
            edge_coefficient=d.get("edge_coefficient"),
        )

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "p", "dp"])
        for row in zip(self.x, self.p, self.dp):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_function(cls, pdf, dpdf, half_width=DEFAULT_HALF_WIDTH, points=DEFAULT_POINTS):
        """Sample a known density on the standard grid (mainly for tests)."""
        dx = 2.0 * half_width / points
        x = -half_width + dx * np.arange(points)
        p = np.asarray(pdf(x), dtype=float)
        return cls(-half_width, dx, p, np.asarray(dpdf(x), dtype=float),
                   mass_defect=1.0 - float(np.sum(p) * dx))


def invert_cf(cf_pos, half_width, points):
    """Density and derivative from characteristic-function values on ``t >= 0``.

    ``cf_pos[k]`` must hold ``phi(k * pi / half_width)`` for ``k = 0..points/2``;
    the negative half follows from ``phi(-t) = conj(phi(t))``.
    """
    N = points
    dt = math.pi / half_width
    k = np.arange(N) - N // 2
    phi = np.empty(N, dtype=complex)
    phi[N // 2:] = cf_pos[:N // 2]
    phi[:N // 2] = np.conj(cf_pos[N // 2:0:-1])
    t = k * dt
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    jsign = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    scale = dt / (2.0 * math.pi)
    p = scale * jsign * np.fft.fft(phi * sign).real
    dp = scale * jsign * np.fft.fft(-1j * t * phi * sign).real
    return p, dp


def _check_grid(p, dx, mass, half_width):
    defect = 1.0 - mass
    pmax = float(np.max(p))
    tail = max(float(p[0]), float(p[-1]))
    if abs(defect) > MASS_TOL:
        raise GridTooCoarse(f"mass defect {defect:.3g} exceeds {MASS_TOL} on half-width {half_width}")
    if tail > TAIL_TOL * pmax:
        raise GridTooCoarse(f"density at the grid boundary {tail:.3g} exceeds {TAIL_TOL}*max on half-width {half_width}")
    return defect


def _refining(build, half_width, points, refine):
    half_width = float(half_width)
    if not half_width > 0:
        raise ValueError("half_width must be positive")
    points = check_power_of_two(points, "points", MIN_POINTS)
    while True:
        try:
            return build(half_width, points)
        except GridTooCoarse:
            if not refine or points * 2 > MAX_POINTS:
                raise
            half_width *= 2.0
            points *= 2


def density(s: SecondChaosSpectrum, half_width=DEFAULT_HALF_WIDTH, points=DEFAULT_POINTS, refine=True) -> DensityGrid:
    """Density grid of the law encoded by ``s`` on ``[-half_width, half_width)``.

    On :class:`GridTooCoarse` the grid is widened (half-width and point count
    doubled, spacing kept) up to ``2**20`` points unless ``refine`` is false.
    """
    return _refining(lambda hw, n: _density(s, hw, n), half_width, points, refine)


def _density(s, half_width, points):
    N = points
    dx = 2.0 * half_width / N
    x = -half_width + dx * np.arange(N)
    t_pos = (math.pi / half_width) * np.arange(N // 2 + 1)

    edge = s.left_edge
    mixture = None
    exponent = coefficient = None
    if edge is not None:
        m = s.positive_count
        exponent = 0.5 * m - 1.0
        # small-ball density of sum lam W^2: u^{m/2-1} / (Gamma(m/2) prod sqrt(2 lam))
        pos = s.lambdas[-m:]
        coefficient = math.exp(-special.gammaln(0.5 * m) - 0.5 * float(np.sum(np.log(2.0 * pos))))
        if m <= MIXTURE_MAX_COUNT:
            mixture = GammaMixture.from_lambdas(s.lambdas[s.lambdas > 0])

    floor = 1e-20 / (1.0 + t_pos[-1]) ** 2
    cf = _char_fn_decaying(s, t_pos, floor)
    if mixture is not None:
        cf = cf - np.exp(1j * edge * t_pos) * mixture.char_fn(t_pos)
    p, dp = invert_cf(cf, half_width, N)

    if edge is not None:
        inside = x > edge
        p = np.where(inside, p, 0.0)
        dp = np.where(inside, dp, 0.0)
    if mixture is not None:
        mp, mdp = mixture.pdf(x - edge)
        p = p + mp
        dp = dp + mdp

    neg = p < 0
    clamped = float(np.sum(-p[neg]) * dx)
    p = np.where(neg, 0.0, p)
    dp = np.where(neg, 0.0, dp)

    if mixture is not None:
        lo, hi = x[0] - 0.5 * dx - edge, x[-1] + 0.5 * dx - edge
        mass = float(mixture.cdf(hi) - mixture.cdf(lo))
        mass += float(np.sum(p - mp) * dx)
    else:
        mass = float(np.sum(p) * dx)
    defect = _check_grid(p, dx, mass, half_width)
    return DensityGrid(-half_width, dx, p, dp, edge, exponent, defect, clamped, coefficient,
                       meta={"h": s.h, "n": s.n})


@dataclass(frozen=True)
class CumulantSet:
    kappa: dict

    def __getitem__(self, order):
        return self.kappa[order]


def cumulants(s: SecondChaosSpectrum, max_order=4) -> CumulantSet:
    """Cumulants ``kappa_p = 2^{p-1} (p-1)! sum lam^p`` for ``p = 1..max_order``."""
    max_order = check_positive_int(max_order, "max_order", 2)
    lam = s.lambdas
    kappa = {1: 0.0}
    for p in range(2, max_order + 1):
        kappa[p] = 2.0 ** (p - 1) * math.factorial(p - 1) * float(np.sum(lam ** p))
    return CumulantSet(kappa)
