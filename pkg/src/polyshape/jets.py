"""Truncated bivariate Taylor algebra.

A :class:`Jet` stores the Taylor-normalized coefficients ``c_alpha =
D^alpha f(x0) / alpha!`` of a scalar function at a base point, densely, for all
multi-indices up to the truncation order ``K`` in graded order (see
:mod:`polyshape._multiindex`). A :class:`MapJet` bundles two such jets into a
map ``R^2 -> R^2``. Map jets compose and invert formally, which is enough to
evaluate ``Delta_phi^s u = (Delta^s (u o phi^{-1})) o phi`` exactly on
polynomial data.
"""
from dataclasses import dataclass
from math import factorial

import numpy as np

from . import kernels
from ._multiindex import (
    degrees,
    index,
    index_array,
    laplacian_power_functional,
    multi_indices,
    ncoef,
)
from .errors import JetStructureError, SingularJacobian

BASE_TOL = 1e-12


def _as_point(x):
    p = np.asarray(x, dtype=float).reshape(2)
    return p


@dataclass(frozen=True, eq=False)
class Jet:
    """Scalar jet of order ``order`` at ``base_point``."""

    base_point: np.ndarray
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        bp = _as_point(self.base_point)
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if self.order < 0:
            raise JetStructureError("order must be non-negative")
        if c.size != ncoef(self.order):
            raise JetStructureError(
                f"order {self.order} needs {ncoef(self.order)} coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise JetStructureError("non-finite jet coefficient")
        bp.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, base_point, order):
        return cls(base_point, order, np.zeros(ncoef(order)))

    @classmethod
    def constant(cls, base_point, order, value):
        c = np.zeros(ncoef(order))
        c[0] = value
        return cls(base_point, order, c)

    @classmethod
    def variable(cls, base_point, order, i):
        """Jet of the coordinate function ``x_i`` (``i`` in {0, 1})."""
        c = np.zeros(ncoef(order))
        bp = _as_point(base_point)
        c[0] = bp[i]
        if order >= 1:
            c[1 + i] = 1.0
        return cls(bp, order, c)

    @classmethod
    def from_dict(cls, base_point, order, terms):
        """Build from ``{(a, b): c_ab}`` Taylor coefficients."""
        c = np.zeros(ncoef(order))
        for (a, b), v in terms.items():
            if a + b <= order:
                c[index(a, b)] = v
        return cls(base_point, order, c)

    def __getitem__(self, alpha):
        a, b = alpha
        if a + b > self.order:
            return 0.0
        return float(self.coeffs[index(a, b)])

    @property
    def value(self):
        return float(self.coeffs[0])

    def derivative(self, alpha):
        """``D^alpha f`` at the base point."""
        a, b = alpha
        return self[alpha] * factorial(a) * factorial(b)

    def truncate(self, order):
        if order > self.order:
            raise JetStructureError("cannot raise truncation order")
        return Jet(self.base_point, order, self.coeffs[:ncoef(order)])

    def _check(self, other):
        if not isinstance(other, Jet):
            raise JetStructureError(f"expected Jet, got {type(other).__name__}")
        if other.order != self.order:
            raise JetStructureError(f"order mismatch: {self.order} vs {other.order}")
        if np.max(np.abs(other.base_point - self.base_point)) > BASE_TOL:
            raise JetStructureError("base point mismatch")

    def __add__(self, other):
        return jet_add(self, other)

    def __sub__(self, other):
        self._check(other)
        return Jet(self.base_point, self.order, self.coeffs - other.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Jet(self.base_point, self.order, self.coeffs * float(other))
        return jet_mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return Jet(self.base_point, self.order, -self.coeffs)

    def __repr__(self):
        terms = ", ".join(f"{a}{b}:{v:.6g}" for (a, b), v in zip(multi_indices(self.order), self.coeffs)
                          if v != 0.0)
        return f"Jet(base={self.base_point.tolist()}, K={self.order}, {{{terms}}})"


@dataclass(frozen=True, eq=False)
class MapJet:
    """Jet of a map ``R^2 -> R^2``; both components share base point and order."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != 2:
            raise JetStructureError("a map jet has exactly two components")
        comps[0]._check(comps[1])
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_array(cls, base_point, order, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        return cls((Jet(base_point, order, coeffs[0]), Jet(base_point, order, coeffs[1])))

    @classmethod
    def identity(cls, base_point, order):
        return cls((Jet.variable(base_point, order, 0), Jet.variable(base_point, order, 1)))

    @classmethod
    def linear(cls, base_point, order, A, b=(0.0, 0.0)):
        """Jet of ``x -> A x + b`` at ``base_point``."""
        A = np.asarray(A, dtype=float)
        x0 = _as_point(base_point)
        val = A @ x0 + np.asarray(b, dtype=float)
        c = np.zeros((2, ncoef(order)))
        c[:, 0] = val
        if order >= 1:
            c[:, 1:3] = A
        return cls.from_array(x0, order, c)

    @property
    def base_point(self):
        return self.components[0].base_point

    @property
    def order(self):
        return self.components[0].order

    @property
    def value(self):
        return np.array([c.value for c in self.components])

    @property
    def linear_part(self):
        """``2x2`` Jacobian matrix ``[d phi_i / d x_j]``."""
        if self.order < 1:
            raise JetStructureError("order-0 map jet has no linear part")
        return self.as_array()[:, 1:3].copy()

    def as_array(self):
        return np.stack([c.coeffs for c in self.components])

    def __getitem__(self, i):
        return self.components[i]


def jet_add(a, b):
    """Coefficient-wise sum."""
    a._check(b)
    return Jet(a.base_point, a.order, a.coeffs + b.coeffs)


def jet_mul(a, b):
    """Truncated Cauchy product, discarding terms of order above ``K``."""
    a._check(b)
    out = kernels.jet_mul(a.coeffs[None, :], b.coeffs[None, :], a.order)
    return Jet(a.base_point, a.order, out[0])


def jet_compose(f, g):
    """Jet of ``f o g`` at ``g.base_point``.

    ``f`` is a :class:`Jet` at ``y0`` and ``g`` a :class:`MapJet` at ``x0`` with
    ``g(x0) = y0``; both of order ``K``.
    """
    if isinstance(f, MapJet):
        return MapJet((jet_compose(f[0], g), jet_compose(f[1], g)))
    if f.order != g.order:
        raise JetStructureError(f"order mismatch: {f.order} vs {g.order}")
    if np.max(np.abs(g.value - f.base_point)) > BASE_TOL:
        raise JetStructureError(
            f"value of inner map {g.value.tolist()} differs from base point {f.base_point.tolist()}")
    delta = g.as_array()
    delta[:, 0] = 0.0
    P = kernels.map_powers(delta[None], g.order)[0]
    return Jet(g.base_point, g.order, f.coeffs @ P)


def map_invert(g):
    """Formal inverse jet of ``g``: a map jet at ``g(x0)`` whose value is ``x0``.

    Solved order by order: invert the linear part, then cancel higher orders.
    """
    if g.order < 1:
        raise JetStructureError("need order >= 1 to invert")
    L = g.linear_part
    if abs(np.linalg.det(L)) <= 1e-14 * max(1.0, np.abs(L).max() ** 2):
        raise SingularJacobian(f"singular linear part, det = {np.linalg.det(L):.3e}")
    try:
        h = kernels.map_invert(g.as_array()[None], g.order)[0]
    except ZeroDivisionError as exc:
        raise SingularJacobian(str(exc)) from None
    h[:, 0] = g.base_point
    return MapJet.from_array(g.value, g.order, h)


def laplacian_power_value(v, s):
    """``Delta^s v`` at the base point, read from Taylor coefficients."""
    if v.order < 2 * s:
        raise JetStructureError(f"order {v.order} < {2 * s} needed for Delta^{s}")
    ell = laplacian_power_functional(v.order, s)
    return float(ell @ v.coeffs)


def pullback_laplacian_power(u_jet, phi_jet, s):
    """Value of ``Delta_phi^s u`` at the common base point.

    Inverts ``phi_jet``, composes ``u_jet`` with the inverse to get the jet of
    ``v = u o phi^{-1}`` at ``y = phi(x)``, and reads ``Delta^s v`` from it.
    """
    if u_jet.order < 2 * s or phi_jet.order < 2 * s:
        raise JetStructureError(f"jet order must be at least {2 * s}")
    if u_jet.order != phi_jet.order:
        raise JetStructureError("u and phi jets must share the order")
    if np.max(np.abs(u_jet.base_point - phi_jet.base_point)) > BASE_TOL:
        raise JetStructureError("u and phi jets must share the base point")
    if s == 0:
        return u_jet.value
    v = jet_compose(u_jet, map_invert(phi_jet))
    return laplacian_power_value(v, s)


def derivative_tensor_apply(f, direction, k):
    """``D^k f[a, ..., a]`` at the base point, i.e. ``k! * sum_{|alpha|=k} c_alpha a^alpha``."""
    if f.order < k:
        raise JetStructureError(f"order {f.order} < {k}")
    a = np.asarray(direction, dtype=float).reshape(2)
    idx = index_array(f.order)
    sel = degrees(f.order) == k
    mono = np.prod(a[None, :] ** idx[sel], axis=1)
    return float(factorial(k) * np.dot(f.coeffs[sel], mono))
