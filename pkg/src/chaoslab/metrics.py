"""Distances between a density grid and the standard Gaussian.

All integrals are trapezoid sums on the uniform grid of a :class:`DensityGrid`;
the Gaussian reference is evaluated analytically at the grid points.
Relative Fisher information that is infinite is reported as ``math.inf``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import mpmath
import numpy as np
from scipy import special

from .analytics import (
    DEFAULT_HALF_WIDTH,
    DEFAULT_POINTS,
    DensityGrid,
    _char_fn_decaying,
    _check_grid,
    _refining,
    density,
    invert_cf,
)
from .exceptions import QuadratureFailure
from .fgn import FgnSpec, SecondChaosSpectrum, spectrum

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
P_FLOOR_REL = 1e-14
FLOOR_STABILITY = 0.05
CHAIN_TOL = 1e-6
EDGE_CORRECTION_MAX = 4.0


def _trapz(f, dx):
    return float(dx * (np.sum(f) - 0.5 * (f[0] + f[-1])))


def _gauss(x):
    return np.exp(-0.5 * x * x - LOG_SQRT_2PI)


def _outside_gauss_mass(g):
    lo, hi = g.x0, g.x0 + g.dx * (g.p.size - 1)
    return float(special.ndtr(lo) + special.ndtr(-hi))


def tv_distance(g: DensityGrid) -> float:
    """Total variation distance ``(1/2) int |p - p_N|``."""
    return 0.5 * _trapz(np.abs(g.p - _gauss(g.x)), g.dx)


def tv_error_budget(g: DensityGrid) -> float:
    """Mass unaccounted for by the grid, halved (bounds the truncation error of the TV value)."""
    return 0.5 * (_outside_gauss_mass(g) + abs(g.mass_defect) + g.clamped_mass)


def lr_distance(g: DensityGrid, r) -> float:
    """``||p - p_N||_r`` for ``r >= 1``; ``r = inf`` gives the sup over grid points."""
    diff = np.abs(g.p - _gauss(g.x))
    if r == math.inf:
        return float(np.max(diff))
    if r < 1:
        raise ValueError("r must be >= 1")
    return _trapz(diff ** r, g.dx) ** (1.0 / r)


def sup_distance(g: DensityGrid) -> float:
    return lr_distance(g, math.inf)


def relative_entropy(g: DensityGrid) -> float:
    """``int p log(p / p_N)`` over the points where ``p`` exceeds the floor."""
    p = g.p
    keep = p > P_FLOOR_REL * np.max(p)
    x = g.x
    integrand = np.zeros_like(p)
    integrand[keep] = p[keep] * (np.log(p[keep]) + 0.5 * x[keep] ** 2 + LOG_SQRT_2PI)
    return _trapz(integrand, g.dx)


def _fisher_integral(g, floor):
    p, dp, x = g.p, g.dp, g.x
    keep = p > floor
    integrand = np.zeros_like(p)
    integrand[keep] = (dp[keep] + x[keep] * p[keep]) ** 2 / p[keep]
    return _trapz(integrand, g.dx) - _edge_correction(g)


def _edge_correction(g):
    """Leading error of the grid sum against an integrand ``~ C u^beta`` at the support edge.

    With ``p ~ c u^a`` the Fisher integrand behaves like ``a^2 c u^(a-2)``; for
    grid points at ``u = (j + theta) dx`` the sum overshoots the integral by
    ``C dx^(beta+1) zeta(-beta, theta)`` (Hurwitz zeta, generalized
    Euler-Maclaurin). Only needed while the integrand is unbounded or kinked.
    """
    a, c, edge = g.edge_exponent, g.edge_coefficient, g.left_support_edge
    if a is None or c is None or not 1.0 < a < EDGE_CORRECTION_MAX:
        return 0.0
    theta = (g.x0 - edge) / g.dx % 1.0 or 1.0
    beta = a - 2.0
    return a * a * c * g.dx ** (beta + 1.0) * float(mpmath.zeta(-beta, theta))


def fisher_excess(g: DensityGrid) -> float:
    """Relative Fisher information ``J(F) - 1 = int (p'/p + x)^2 p``, or ``inf``.

    A hard support edge with ``p ~ (x - edge)^a``, ``a <= 1``, makes the score
    non square-integrable, so the value is ``inf`` outright. Otherwise the
    integral over ``{p > floor}`` is accepted only if it moves by less than 5%
    when the floor is lowered tenfold.
    """
    if g.edge_exponent is not None and g.edge_exponent <= 1.0:
        return math.inf
    pmax = float(np.max(g.p))
    coarse = _fisher_integral(g, P_FLOOR_REL * pmax)
    fine = _fisher_integral(g, 0.1 * P_FLOOR_REL * pmax)
    if abs(fine - coarse) > FLOOR_STABILITY * max(abs(coarse), 1e-12):
        return math.inf
    return coarse


class ShimizuResult(NamedTuple):
    sup: float
    bound: float
    ok: bool


def shimizu_check(g: DensityGrid, fisher=None) -> ShimizuResult:
    """Compare ``||p - p_N||_inf`` with ``sqrt(J - 1)``."""
    if fisher is None:
        fisher = fisher_excess(g)
    if not math.isfinite(fisher):
        raise ValueError("Shimizu bound needs a finite Fisher excess")
    sup = sup_distance(g)
    bound = math.sqrt(max(fisher, 0.0))
    return ShimizuResult(sup, bound, sup <= bound + CHAIN_TOL)


def gaussian_smoothed_density(s: SecondChaosSpectrum, t, half_width=DEFAULT_HALF_WIDTH,
                              points=DEFAULT_POINTS, refine=True) -> DensityGrid:
    """Density of ``sqrt(t) F + sqrt(1 - t) N`` with ``N`` independent of ``F``."""
    t = float(t)
    if not 0.0 < t <= 1.0:
        raise ValueError("t must lie in (0, 1]")
    if t == 1.0:
        return density(s, half_width, points, refine)
    return _refining(lambda hw, n: _smoothed(s, t, hw, n), half_width, points, refine)


def _smoothed(s, t, half_width, points):
    u = (math.pi / half_width) * np.arange(points // 2 + 1)
    damp = np.exp(-0.5 * (1.0 - t) * u * u)
    floor = 1e-20 / (1.0 + u[-1]) ** 2
    # the damping may kill the tail long before phi does
    live = damp > floor
    cf = np.zeros(u.size, dtype=complex)
    cf[live] = _char_fn_decaying(s, math.sqrt(t) * u[live], floor) * damp[live]
    p, dp = invert_cf(cf, half_width, points)
    neg = p < 0
    dx = 2.0 * half_width / points
    clamped = float(np.sum(-p[neg]) * dx)
    p = np.where(neg, 0.0, p)
    dp = np.where(neg, 0.0, dp)
    defect = _check_grid(p, dx, float(np.sum(p) * dx), half_width)
    return DensityGrid(-half_width, dx, p, dp, None, None, defect, clamped,
                       meta={"h": s.h, "n": s.n, "t": t})


def de_bruijn_entropy(s: SecondChaosSpectrum, half_width=DEFAULT_HALF_WIDTH, points=DEFAULT_POINTS,
                      rtol=1e-4, max_nodes=128) -> float:
    """Relative entropy as ``int_0^1 (J(sqrt(t) F + sqrt(1-t) N) - 1) / (2t) dt``.

    Gauss-Legendre rules of doubling size are applied until two successive
    values agree to ``rtol`` (relative) or ``1e-10`` (absolute).
    """
    cache = {}

    def integrand(t):
        if t not in cache:
            g = gaussian_smoothed_density(s, t, half_width, points)
            j = fisher_excess(g)
            if not math.isfinite(j):
                raise QuadratureFailure(f"Fisher excess diverges at t={t}")
            cache[t] = j / (2.0 * t)
        return cache[t]

    prev = None
    m = 8
    while m <= max_nodes:
        nodes, weights = np.polynomial.legendre.leggauss(m)
        ts = 0.5 * (nodes + 1.0)
        value = 0.5 * math.fsum(w * integrand(float(t)) for t, w in zip(ts, weights))
        if prev is not None and abs(value - prev) <= max(rtol * abs(value), 1e-10):
            return value
        prev = value
        m *= 2
    raise QuadratureFailure(f"de Bruijn integral did not stabilize with {max_nodes} nodes")


@dataclass(frozen=True)
class DistanceReport:
    """Distances of one law to the standard Gaussian, with provenance."""

    tv: float
    sup: float
    entropy: float
    fisher_excess: float
    l_r: dict = field(default_factory=dict)
    stein_bound: float | None = None
    stein_se: float | None = None
    h: float | None = None
    n: int | None = None
    error_budget: float = 0.0

    @property
    def fisher_divergent(self):
        return not math.isfinite(self.fisher_excess)

    def chain(self, tol=CHAIN_TOL):
        """Status of the Pinsker, log-Sobolev and Shimizu inequalities.

        Entries are ``None`` when the Fisher excess is infinite (nothing to check).
        """
        out = {"pinsker": 2.0 * self.tv ** 2 <= self.entropy + tol}
        if self.fisher_divergent:
            out["log_sobolev"] = None
            out["shimizu"] = None
        else:
            out["log_sobolev"] = self.entropy <= 0.5 * self.fisher_excess + tol
            out["shimizu"] = self.sup <= math.sqrt(max(self.fisher_excess, 0.0)) + tol
        return out

    def to_dict(self):
        return {
            "h": self.h,
            "n": self.n,
            "tv": self.tv,
            "sup": self.sup,
            "entropy": self.entropy,
            "fisher_excess": "divergent" if self.fisher_divergent else self.fisher_excess,
            "l_r": {str(k): v for k, v in self.l_r.items()},
            "stein_bound": self.stein_bound,
            "stein_se": self.stein_se,
            "error_budget": self.error_budget,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def distance_report(g: DensityGrid, r_values=(2,), h=None, n=None, stein=None) -> DistanceReport:
    """Assemble a :class:`DistanceReport` from a density grid.

    ``stein`` may be an estimate with ``mean`` and ``std_error`` attributes.
    """
    return DistanceReport(
        tv=tv_distance(g),
        sup=sup_distance(g),
        entropy=relative_entropy(g),
        fisher_excess=fisher_excess(g),
        l_r={r: lr_distance(g, r) for r in r_values},
        stein_bound=None if stein is None else stein.mean,
        stein_se=None if stein is None else stein.std_error,
        h=h if h is not None else g.meta.get("h"),
        n=n if n is not None else g.meta.get("n"),
        error_budget=tv_error_budget(g),
    )


def report_for(spec: FgnSpec, half_width=DEFAULT_HALF_WIDTH, points=DEFAULT_POINTS, **kwargs) -> DistanceReport:
    """Distance report for ``F_n`` at ``spec``."""
    return distance_report(density(spectrum(spec), half_width, points), h=spec.h, n=spec.n, **kwargs)

