"""Graded multi-index bookkeeping for bivariate jets and polynomials.

Multi-indices ``(a, b)`` with ``a + b <= K`` are stored in graded order:
total degree first, then increasing power of the second variable, so the
coefficients of order ``<= K'`` always form a prefix of those of order ``K``.
"""
from functools import lru_cache
from math import comb, factorial

import numpy as np

MAX_ORDER = 24


def ncoef(K):
    """Number of multi-indices of total degree at most ``K``."""
    return (K + 1) * (K + 2) // 2


def index(a, b):
    k = a + b
    return k * (k + 1) // 2 + b


@lru_cache(maxsize=None)
def multi_indices(K):
    """Tuple of ``(a, b)`` pairs in graded order."""
    return tuple((k - b, b) for k in range(K + 1) for b in range(k + 1))


@lru_cache(maxsize=None)
def index_array(K):
    """``(ncoef(K), 2)`` integer array of exponents."""
    return np.array(multi_indices(K), dtype=np.int64).reshape(-1, 2)


@lru_cache(maxsize=None)
def degrees(K):
    return index_array(K).sum(axis=1)


@lru_cache(maxsize=None)
def alpha_factorials(K):
    """``a! * b!`` for every multi-index, as floats."""
    return np.array([factorial(a) * factorial(b) for a, b in multi_indices(K)], dtype=float)


@lru_cache(maxsize=None)
def mul_table(K):
    """Flattened truncated Cauchy-product table.

    Returns int arrays ``(i, j, k)`` listing every pair of coefficient slots
    whose product lands in slot ``k`` without exceeding order ``K``.
    """
    ii, jj, kk = [], [], []
    mi = multi_indices(K)
    for i, (a1, b1) in enumerate(mi):
        for j, (a2, b2) in enumerate(mi):
            if a1 + b1 + a2 + b2 <= K:
                ii.append(i)
                jj.append(j)
                kk.append(index(a1 + a2, b1 + b2))
    return (np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64),
            np.array(kk, dtype=np.int64))


@lru_cache(maxsize=None)
def mul_groups(K):
    """Per-left-slot view of :func:`mul_table`: list of ``(js, ks)``."""
    ii, jj, kk = mul_table(K)
    return tuple((jj[ii == i], kk[ii == i]) for i in range(ncoef(K)))


@lru_cache(maxsize=None)
def power_parents(K):
    """For slot ``p > 0``: the slot ``q`` and component ``c`` with x^p = x^q * x_c.

    Slot 0 gets ``(-1, -1)``.
    """
    parent = np.full(ncoef(K), -1, dtype=np.int64)
    comp = np.full(ncoef(K), -1, dtype=np.int64)
    for p, (a, b) in enumerate(multi_indices(K)):
        if p == 0:
            continue
        if a > 0:
            parent[p], comp[p] = index(a - 1, b), 0
        else:
            parent[p], comp[p] = index(a, b - 1), 1
    return parent, comp


def laplacian_power_functional(K, s):
    """Coefficients of the linear functional ``c -> Delta^s f(base)``.

    ``c`` holds Taylor-normalized coefficients, so ``D^alpha f = alpha! c_alpha``.
    """
    if 2 * s > K:
        raise ValueError(f"order {K} too low for Laplacian power {s}")
    ell = np.zeros(ncoef(K))
    for k in range(s + 1):
        a, b = 2 * k, 2 * (s - k)
        ell[index(a, b)] = comb(s, k) * factorial(a) * factorial(b)
    return ell


def gradient_laplacian_functional(K, s):
    """``(2, ncoef(K))`` functionals for ``grad Delta^s f(base)``."""
    if 2 * s + 1 > K:
        raise ValueError(f"order {K} too low for grad Laplacian power {s}")
    ell = np.zeros((2, ncoef(K)))
    for k in range(s + 1):
        a, b = 2 * k, 2 * (s - k)
        w = comb(s, k)
        ell[0, index(a + 1, b)] = w * factorial(a + 1) * factorial(b)
        ell[1, index(a, b + 1)] = w * factorial(a) * factorial(b + 1)
    return ell


def form_functionals(power, K=None):
    """Functionals for the weak form of ``Delta^power``.

    Even powers ``2s`` use ``Delta^s`` (one row); odd powers ``2s+1`` use the two
    components of ``grad Delta^s``. Returns ``(ell, K)``.
    """
    s, odd = divmod(power, 2)
    need = 2 * s + odd
    K = need if K is None else K
    if odd:
        return gradient_laplacian_functional(K, s), K
    return laplacian_power_functional(K, s)[None, :], K
