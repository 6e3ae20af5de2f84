"""Finite-dimensional Wiener chaos calculus.

The Hilbert space is R^d with its canonical orthonormal basis, so the isonormal
process is a standard Gaussian vector ``z`` and a kernel of order ``q`` is a
symmetric array of shape ``(d,) * q``. Multiple integrals are realized through
``I_q(e_{i_1} (x) ... (x) e_{i_q}) = prod_j H_{m_j}(z_j)`` where ``m_j`` counts
the occurrences of ``j`` in the multi-index.

Everything here is exact linear algebra meant for small instances
(``d <= 8``, kernel order ``<= 4``); products build dense arrays of order
``p + q``.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .exceptions import DimensionMismatch, NotPureChaos, RankError

SYMMETRY_TOL = 1e-12


def hermite(q, x):
    """Probabilists' Hermite polynomial ``H_q`` evaluated at ``x`` (vectorized)."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if q == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for k in range(1, q):
        h_prev, h = h, x * h - k * h_prev
    return h if h.ndim else float(h)


def _hermite_table(q_max, z):
    """Array ``T`` with ``T[k] = H_k(z)`` for ``k = 0..q_max``."""
    table = np.empty((q_max + 1,) + z.shape)
    table[0] = 1.0
    if q_max >= 1:
        table[1] = z
    for k in range(1, q_max):
        table[k + 1] = z * table[k] - k * table[k - 1]
    return table


@lru_cache(maxsize=32)
def _orbit_labels(d, q):
    # label every flat position of a (d,)*q array by the id of its sorted
    # multi-index, so symmetrization is a group average over labels
    idx = np.indices((d,) * q).reshape(q, -1)
    canon = np.sort(idx, axis=0)
    code = np.zeros(canon.shape[1], dtype=np.int64)
    for row in canon:
        code = code * d + row
    _, labels = np.unique(code, return_inverse=True)
    counts = np.bincount(labels)
    return labels, counts


def symmetrize(t, dim=None):
    """Average of ``t`` over all permutations of its axes.

    Parameters
    ----------
    t : array_like
        Tensor of shape ``(d,) * q``; a scalar is a tensor of order 0.
    dim : int, optional
        Required only for order 0, where the shape carries no dimension.
    """
    t = np.asarray(t, dtype=float)
    q = t.ndim
    if q == 0:
        if dim is None:
            raise ValueError("dim is required for an order-0 tensor")
        return SymmetricTensor(t, dim=dim, check=False)
    d = t.shape[0]
    if any(s != d for s in t.shape):
        raise DimensionMismatch(f"tensor axes differ in length: {t.shape}")
    if q == 1:
        return SymmetricTensor(t, check=False)
    labels, counts = _orbit_labels(d, q)
    means = np.bincount(labels, weights=t.ravel()) / counts
    return SymmetricTensor(means[labels].reshape(t.shape), check=False)


class SymmetricTensor:
    """Element of the ``q``-th symmetric tensor power of ``R^d``.

    Coefficients are held as a dense symmetric array; :meth:`canonical_items`
    gives the sorted-multi-index view used for serialization.
    """

    __slots__ = ("coeffs", "dim")

    def __init__(self, coeffs, dim=None, check=True):
        a = np.array(coeffs, dtype=float)
        if a.ndim == 0:
            if dim is None:
                raise ValueError("dim is required for an order-0 tensor")
        else:
            if any(s != a.shape[0] for s in a.shape):
                raise DimensionMismatch(f"tensor axes differ in length: {a.shape}")
            if dim is not None and dim != a.shape[0]:
                raise DimensionMismatch(f"dim={dim} but tensor has axes of length {a.shape[0]}")
            dim = a.shape[0]
        if check and a.ndim >= 2:
            scale = max(1.0, float(np.max(np.abs(a))))
            for perm in itertools.permutations(range(a.ndim)):
                if np.max(np.abs(a - a.transpose(perm))) > SYMMETRY_TOL * scale:
                    raise ValueError("coefficients are not symmetric; use symmetrize()")
        a.setflags(write=False)
        self.coeffs = a
        self.dim = int(dim)

    @property
    def order(self):
        return self.coeffs.ndim

    @classmethod
    def basis(cls, dim, *indices):
        """Symmetrization of ``e_{i_1} (x) ... (x) e_{i_q}`` (0-based indices)."""
        t = np.zeros((dim,) * len(indices))
        if not indices:
            return cls(1.0, dim=dim)
        t[tuple(indices)] = 1.0
        return symmetrize(t)

    def norm(self):
        return float(np.sqrt(np.sum(self.coeffs * self.coeffs)))

    def inner(self, other):
        _check_same_dim(self, other)
        if self.order != other.order:
            raise DimensionMismatch("inner product needs tensors of equal order")
        return float(np.sum(self.coeffs * other.coeffs))

    def __add__(self, other):
        _check_same_dim(self, other)
        return SymmetricTensor(self.coeffs + other.coeffs, dim=self.dim, check=False)

    def __mul__(self, c):
        return SymmetricTensor(float(c) * self.coeffs, dim=self.dim, check=False)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymmetricTensor(order={self.order}, dim={self.dim}, norm={self.norm():.6g})"

    def canonical_items(self):
        """Yield ``(sorted multi-index, value, multiplicity)`` for nonzero entries."""
        for idx in itertools.combinations_with_replacement(range(self.dim), self.order):
            v = float(self.coeffs[idx]) if idx else float(self.coeffs)
            if v != 0.0:
                yield idx, v, _multinomial(idx)

    def to_dict(self):
        return {
            "order": self.order,
            "dim": self.dim,
            "entries": [[list(idx), v] for idx, v, _ in self.canonical_items()],
        }

    @classmethod
    def from_dict(cls, d):
        order, dim = int(d["order"]), int(d["dim"])
        if order == 0:
            value = d["entries"][0][1] if d["entries"] else 0.0
            return cls(value, dim=dim)
        a = np.zeros((dim,) * order)
        for idx, v in d["entries"]:
            for perm in set(itertools.permutations(idx)):
                a[perm] = v
        return cls(a)


def _multinomial(idx):
    counts = np.bincount(idx) if idx else np.zeros(0, dtype=int)
    out = math.factorial(len(idx))
    for c in counts:
        out //= math.factorial(int(c))
    return out


def _check_same_dim(f, g):
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimensions differ: {f.dim} vs {g.dim}")


def contract(f: SymmetricTensor, g: SymmetricTensor, r: int) -> np.ndarray:
    """Contraction ``f (x)_r g``: pair the last ``r`` slots of ``f`` and ``g``.

    The result has order ``p + q - 2r`` and need not be symmetric.
    """
    _check_same_dim(f, g)
    p, q = f.order, g.order
    if not 0 <= r <= min(p, q):
        raise RankError(f"contraction order r={r} outside [0, {min(p, q)}]")
    return np.tensordot(f.coeffs, g.coeffs, axes=(list(range(p - r, p)), list(range(q - r, q))))


class ChaosExpansion:
    """Finite chaos decomposition ``c + sum_q I_q(f_q)`` over ``R^dim``."""

    def __init__(self, dim, constant=0.0, kernels=None):
        self.dim = int(dim)
        self.constant = float(constant)
        self.kernels = {}
        for q, f in (kernels or {}).items():
            if not isinstance(f, SymmetricTensor):
                f = SymmetricTensor(f, dim=dim)
            if f.dim != self.dim:
                raise DimensionMismatch(f"kernel of order {q} has dim {f.dim}, expected {self.dim}")
            if f.order != q:
                raise ValueError(f"kernel stored under order {q} has order {f.order}")
            if q == 0:
                self.constant += float(f.coeffs)
            else:
                self.kernels[q] = f

    @classmethod
    def single(cls, f: SymmetricTensor):
        """The multiple integral ``I_q(f)``."""
        if f.order == 0:
            return cls(f.dim, constant=float(f.coeffs))
        return cls(f.dim, kernels={f.order: f})

    def orders(self):
        return sorted(q for q, f in self.kernels.items() if f.norm() > 0)

    def pure_order(self):
        """Order ``q`` if this is ``I_q(f)`` with no other component, else raise."""
        orders = self.orders()
        if len(orders) != 1 or self.constant != 0.0:
            raise NotPureChaos(f"expansion has constant {self.constant} and orders {orders}")
        return orders[0]

    @property
    def mean(self):
        return self.constant

    def second_moment(self):
        return self.constant ** 2 + sum(math.factorial(q) * f.norm() ** 2 for q, f in self.kernels.items())

    def inner(self, other):
        """``E[F G]`` by the isometry of multiple integrals."""
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimensions differ: {self.dim} vs {other.dim}")
        total = self.constant * other.constant
        for q, f in self.kernels.items():
            g = other.kernels.get(q)
            if g is not None:
                total += math.factorial(q) * f.inner(g)
        return total

    def __add__(self, other):
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimensions differ: {self.dim} vs {other.dim}")
        kernels = dict(self.kernels)
        for q, g in other.kernels.items():
            kernels[q] = kernels[q] + g if q in kernels else g
        return ChaosExpansion(self.dim, self.constant + other.constant, kernels)

    def scale(self, c):
        c = float(c)
        return ChaosExpansion(self.dim, c * self.constant, {q: c * f for q, f in self.kernels.items()})

    def __mul__(self, other):
        if not isinstance(other, ChaosExpansion):
            return self.scale(other)
        if self.dim != other.dim:
            raise DimensionMismatch(f"dimensions differ: {self.dim} vs {other.dim}")
        out = ChaosExpansion(self.dim, self.constant * other.constant)
        for q, g in other.kernels.items():
            out = out + ChaosExpansion(self.dim, kernels={q: self.constant * g})
        for p, f in self.kernels.items():
            out = out + ChaosExpansion(self.dim, kernels={p: other.constant * f})
            for g in other.kernels.values():
                out = out + product_formula(f, g)
        return out

    __rmul__ = scale

    def __repr__(self):
        return f"ChaosExpansion(dim={self.dim}, constant={self.constant:.6g}, orders={self.orders()})"

    def to_dict(self):
        return {
            "dim": self.dim,
            "constant": self.constant,
            "kernels": {str(q): f.to_dict() for q, f in sorted(self.kernels.items())},
        }

    @classmethod
    def from_dict(cls, d):
        kernels = {int(q): SymmetricTensor.from_dict(f) for q, f in d["kernels"].items()}
        return cls(d["dim"], d["constant"], kernels)


def product_formula(f: SymmetricTensor, g: SymmetricTensor) -> ChaosExpansion:
    """Chaos expansion of ``I_p(f) I_q(g)``.

    ``sum_{r=0}^{p^q} r! C(p, r) C(q, r) I_{p+q-2r}(sym(f (x)_r g))``.
    """
    _check_same_dim(f, g)
    p, q = f.order, g.order
    out = ChaosExpansion(f.dim)
    for r in range(min(p, q) + 1):
        c = math.factorial(r) * math.comb(p, r) * math.comb(q, r)
        h = symmetrize(contract(f, g, r), dim=f.dim)
        out = out + ChaosExpansion.single(c * h)
    return out


def evaluate(F: ChaosExpansion, z, method="auto"):
    """Realize ``F`` at Gaussian coordinates ``z`` (shape ``(d,)`` or ``(m, d)``).

    ``method="auto"`` uses ``z^T A z - tr(A)`` for order-2 kernels and the
    multi-index Hermite expansion otherwise; ``method="hermite"`` forces the
    expansion for every order.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    if z2.shape[1] != F.dim:
        raise DimensionMismatch(f"sample has {z2.shape[1]} coordinates, expansion has dim {F.dim}")
    out = np.full(z2.shape[0], F.constant)
    q_max = max(F.kernels, default=0)
    table = _hermite_table(q_max, z2) if q_max >= 1 else None
    for q, f in F.kernels.items():
        if q == 1:
            out += z2 @ f.coeffs
        elif q == 2 and method == "auto":
            A = f.coeffs
            out += np.einsum("mi,ij,mj->m", z2, A, z2) - np.trace(A)
        else:
            for idx, v, mult in f.canonical_items():
                term = np.full(z2.shape[0], v * mult)
                for j, m in zip(*np.unique(idx, return_counts=True)):
                    term *= table[m][:, j]
                out += term
    return float(out[0]) if single else out


def malliavin_derivative(F: ChaosExpansion):
    """Components ``D_x F = sum_q q I_{q-1}(f_q(., x))`` for ``x = 0..d-1``."""
    comps = []
    for x in range(F.dim):
        kernels = {}
        const = 0.0
        for q, f in F.kernels.items():
            part = q * f.coeffs[..., x]
            if q == 1:
                const += float(part)
            else:
                kernels[q - 1] = SymmetricTensor(part, check=False)
        comps.append(ChaosExpansion(F.dim, const, kernels))
    return comps


def derivative_inner(F: ChaosExpansion, G: ChaosExpansion) -> ChaosExpansion:
    """Chaos expansion of ``<DF, DG>``."""
    DF, DG = malliavin_derivative(F), malliavin_derivative(G)
    out = ChaosExpansion(F.dim)
    for a, b in zip(DF, DG):
        out = out + a * b
    return out


def divergence_of_derivative(F: ChaosExpansion) -> ChaosExpansion:
    """``delta(DF) = q F`` for ``F`` in the ``q``-th chaos."""
    return F.scale(F.pure_order())


def fourth_cumulant(F: ChaosExpansion) -> float:
    """``E[F^4] - 3 E[F^2]^2`` computed exactly from the expansion of ``F^2``."""
    F.pure_order()
    square = F * F
    return square.second_moment() - 3.0 * F.second_moment() ** 2


def third_cumulant(F: ChaosExpansion) -> float:
    """``E[F^3]`` for a centered pure-chaos ``F``."""
    F.pure_order()
    return (F * F).inner(F)
