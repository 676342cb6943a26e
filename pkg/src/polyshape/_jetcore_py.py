"""Pure numpy implementation of the batched jet kernels.

Every kernel works on a leading batch axis ``N`` (one jet per quadrature node)
and is vectorized across it. The compiled ``_jetcore`` extension exposes the
same functions with the same signatures; :mod:`polyshape.kernels` picks one.
"""
import numpy as np

from ._multiindex import mul_groups, ncoef, power_parents

SINGULAR_TOL = 1e-300


def jet_mul(a, b, K):
    """Truncated product of two batches of jets, shapes ``(N, nc)``."""
    out = np.zeros_like(a)
    for i, (js, ks) in enumerate(mul_groups(K)):
        out[:, ks] += a[:, i, None] * b[:, js]
    return out


def map_powers(delta, K):
    """All monomials ``delta^alpha`` for ``|alpha| <= K``.

    ``delta`` has shape ``(N, 2, nc)``; the result has shape ``(N, nc, nc)``
    with ``out[n, alpha]`` the jet of ``delta_1^a1 * delta_2^a2``.
    """
    N, nc = delta.shape[0], ncoef(K)
    parent, comp = power_parents(K)
    out = np.zeros((N, nc, nc))
    out[:, 0, 0] = 1.0
    for p in range(1, nc):
        out[:, p] = jet_mul(out[:, parent[p]], delta[:, comp[p]], K)
    return out


def map_invert(g, K):
    """Formal inverse of a batch of map jets.

    ``g`` has shape ``(N, 2, nc)``; ``g[:, :, 0]`` is the image point. Returns
    the increment ``h`` (zero constant term) of the inverse map jet in the
    shifted variable ``k = y - g(x0)``, so ``phi^{-1}(y0 + k) = x0 + h(k)``.
    Raises ``ZeroDivisionError`` on a singular linear part.
    """
    N, nc = g.shape[0], ncoef(K)
    L = g[:, :, 1:3]
    det = L[:, 0, 0] * L[:, 1, 1] - L[:, 0, 1] * L[:, 1, 0]
    if np.any(np.abs(det) <= SINGULAR_TOL):
        raise ZeroDivisionError("singular linear part")
    Linv = np.empty_like(L)
    Linv[:, 0, 0] = L[:, 1, 1] / det
    Linv[:, 1, 1] = L[:, 0, 0] / det
    Linv[:, 0, 1] = -L[:, 0, 1] / det
    Linv[:, 1, 0] = -L[:, 1, 0] / det

    h = np.zeros((N, 2, nc))
    if K == 0:
        return h
    h[:, :, 1] = Linv[:, :, 0]
    h[:, :, 2] = Linv[:, :, 1]
    q = g.copy()
    q[:, :, :3] = 0.0
    ident = np.zeros((N, 2, nc))
    ident[:, 0, 1] = 1.0
    ident[:, 1, 2] = 1.0
    # each sweep fixes one more order: h <- L^{-1}(k - Q(h))
    for _ in range(K - 1):
        P = map_powers(h, K)
        r = ident - np.einsum("nca,nab->ncb", q, P)
        h = np.einsum("ncj,njb->ncb", Linv, r)
    return h


def pullback_weights(g, K, ell):
    """Weights turning Taylor coefficients of ``u`` at ``x0`` into ``ell(u o phi^{-1})``.

    ``g``: map jets ``(N, 2, nc)``; ``ell``: functionals ``(nf, nc)`` acting on
    Taylor coefficients at ``y0 = phi(x0)``. Returns ``w`` of shape
    ``(N, nf, nc)`` such that ``ell_f(v) = sum_alpha w[n, f, alpha] c_alpha(u)``.
    """
    h = map_invert(g, K)
    P = map_powers(h, K)
    return np.einsum("nab,fb->nfa", P, ell)
