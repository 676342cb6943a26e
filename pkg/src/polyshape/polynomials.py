"""Bivariate polynomials stored as graded monomial coefficient vectors.

Slot ``index(a, b)`` of a coefficient vector holds the coefficient of
``x**a * y**b``; a vector of length ``ncoef(D)`` describes a polynomial of total
degree at most ``D``. Leading axes are allowed, e.g. ``(2, ncoef(D))`` for a
vector field or ``(nb, ncoef(D))`` for a basis.
"""
from math import comb

import numpy as np
from numpy.polynomial import legendre

from ._multiindex import index, index_array, multi_indices, ncoef


def degree_of_length(n):
    D = 0
    while ncoef(D) < n:
        D += 1
    if ncoef(D) != n:
        raise ValueError(f"{n} is not a triangular coefficient count")
    return D


def to_dense(c):
    """Graded vector(s) -> square array(s) ``[..., a, b]``."""
    c = np.asarray(c, dtype=float)
    D = degree_of_length(c.shape[-1])
    out = np.zeros(c.shape[:-1] + (D + 1, D + 1))
    idx = index_array(D)
    out[..., idx[:, 0], idx[:, 1]] = c
    return out


def from_dense(a, D=None):
    """Square array(s) ``[..., a, b]`` -> graded vector(s); drops terms above ``D``."""
    a = np.asarray(a, dtype=float)
    if D is None:
        D = a.shape[-1] - 1 + a.shape[-2] - 1
    out = np.zeros(a.shape[:-2] + (ncoef(D),))
    for (i, j) in multi_indices(D):
        if i < a.shape[-2] and j < a.shape[-1]:
            out[..., index(i, j)] = a[..., i, j]
    return out


def resize(c, D):
    """Pad (or truncate, if the dropped terms vanish) to degree ``D``."""
    c = np.asarray(c, dtype=float)
    n = ncoef(D)
    if c.shape[-1] >= n:
        if np.any(c[..., n:] != 0.0):
            raise ValueError("truncation would drop nonzero terms")
        return c[..., :n].copy()
    out = np.zeros(c.shape[:-1] + (n,))
    out[..., :c.shape[-1]] = c
    return out


def degree(c):
    """Actual total degree (-1 for the zero polynomial)."""
    c = np.asarray(c)
    D = degree_of_length(c.shape[-1])
    nz = np.any(c.reshape(-1, c.shape[-1]) != 0.0, axis=0)
    if not nz.any():
        return -1
    return int(index_array(D)[nz].sum(axis=1).max())


def multiply(p, q):
    """Product of two scalar polynomials (graded vectors)."""
    P, Q = to_dense(p), to_dense(q)
    Dp, Dq = P.shape[0] - 1, Q.shape[0] - 1
    out = np.zeros((Dp + Dq + 1, Dp + Dq + 1))
    for i in range(Dp + 1):
        for j in range(Dp + 1 - i):
            if P[i, j] != 0.0:
                out[i:i + Dq + 1, j:j + Dq + 1] += P[i, j] * Q
    return from_dense(out, Dp + Dq)


def power_of_one_minus_r2(n):
    """Coefficients of ``(1 - x^2 - y^2)^n``."""
    out = np.zeros((2 * n + 1, 2 * n + 1))
    # multinomial expansion of (1 - x^2 - y^2)^n
    for i in range(n + 1):
        for j in range(n + 1 - i):
            k = n - i - j
            out[2 * i, 2 * j] = comb(n, i) * comb(n - i, j) * (-1) ** (i + j) * (1.0 if k >= 0 else 0.0)
    return from_dense(out, 2 * n)


def legendre_product(a, b):
    """Coefficients of ``P_a(x) P_b(y)`` (Legendre polynomials)."""
    pa = legendre.leg2poly(np.eye(a + 1)[a])
    pb = legendre.leg2poly(np.eye(b + 1)[b])
    return from_dense(np.outer(pa, pb), a + b)


def _powers(t, D):
    out = np.ones(t.shape + (D + 1,))
    for k in range(1, D + 1):
        out[..., k] = out[..., k - 1] * t
    return out


def evaluate(c, pts):
    """Evaluate polynomial(s) at points ``(N, 2)``; returns ``(N,) + c.shape[:-1]``."""
    c = np.asarray(c, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    D = degree_of_length(c.shape[-1])
    idx = index_array(D)
    xp, yp = _powers(pts[:, 0], D), _powers(pts[:, 1], D)
    mono = xp[:, idx[:, 0]] * yp[:, idx[:, 1]]
    return (mono @ c.reshape(-1, c.shape[-1]).T).reshape((pts.shape[0],) + c.shape[:-1])


def shifted_monomials(pts, D, alpha):
    """``(N, ncoef(D))`` Taylor coefficient ``alpha`` of each monomial at ``pts``.

    The coefficient of ``h^alpha`` in ``(x+h1)^a (y+h2)^b`` is
    ``C(a, a1) C(b, b1) x^(a-a1) y^(b-b1)``.
    """
    a1, b1 = alpha
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    idx = index_array(D)
    xp, yp = _powers(pts[:, 0], D), _powers(pts[:, 1], D)
    out = np.zeros((pts.shape[0], idx.shape[0]))
    ok = (idx[:, 0] >= a1) & (idx[:, 1] >= b1)
    ea, eb = idx[ok, 0] - a1, idx[ok, 1] - b1
    cf = np.array([comb(a, a1) * comb(b, b1) for a, b in idx[ok]], dtype=float)
    out[:, ok] = xp[:, ea] * yp[:, eb] * cf
    return out


def taylor(c, pts, K):
    """Exact Taylor coefficients up to order ``K`` at each point.

    ``c`` has shape ``(ncomp, ncoef(D))``; returns ``(N, ncomp, ncoef(K))``.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    D = degree_of_length(c.shape[-1])
    out = np.zeros((pts.shape[0], c.shape[0], ncoef(K)))
    for k, alpha in enumerate(multi_indices(K)):
        if sum(alpha) > D:
            break
        out[:, :, k] = shifted_monomials(pts, D, alpha) @ c.T
    return out


def gradient(c):
    """``(2, ncoef(D))`` coefficients of the gradient of a scalar polynomial."""
    P = to_dense(c)
    D = P.shape[0] - 1
    gx = np.zeros_like(P)
    gy = np.zeros_like(P)
    gx[:-1, :] = P[1:, :] * np.arange(1, D + 1)[:, None]
    gy[:, :-1] = P[:, 1:] * np.arange(1, D + 1)[None, :]
    return np.stack([from_dense(gx, D), from_dense(gy, D)])


def laplacian(c):
    P = to_dense(c)
    D = P.shape[0] - 1
    out = np.zeros_like(P)
    k = np.arange(D + 1)
    out[:-2, :] += P[2:, :] * (k[2:] * (k[2:] - 1))[:, None]
    out[:, :-2] += P[:, 2:] * (k[2:] * (k[2:] - 1))[None, :]
    return from_dense(out, D)
