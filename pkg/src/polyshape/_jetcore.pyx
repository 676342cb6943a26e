# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched jet kernels; drop-in for ``_jetcore_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.string cimport memset

from ._multiindex import mul_table, ncoef, power_parents

cnp.import_array()

cdef enum:
    MAXNC = 45  # ncoef(8)
cdef double SINGULAR_TOL = 1e-300


cdef inline void _mul(const double* a, const double* b, double* out, int nc,
                      const long* ti, const long* tj, const long* tk, int npairs) noexcept nogil:
    cdef int p
    memset(out, 0, nc * sizeof(double))
    for p in range(npairs):
        out[tk[p]] += a[ti[p]] * b[tj[p]]


cdef inline void _powers(const double* d0, const double* d1, double* P, int nc,
                         const long* parent, const long* comp,
                         const long* ti, const long* tj, const long* tk, int npairs) noexcept nogil:
    # P is (nc, nc) row-major
    cdef int p
    memset(P, 0, nc * nc * sizeof(double))
    P[0] = 1.0
    for p in range(1, nc):
        if comp[p] == 0:
            _mul(&P[parent[p] * nc], d0, &P[p * nc], nc, ti, tj, tk, npairs)
        else:
            _mul(&P[parent[p] * nc], d1, &P[p * nc], nc, ti, tj, tk, npairs)


cdef int _invert_one(const double* g0, const double* g1, double* h0, double* h1,
                     int nc, int K, double* P,
                     const long* parent, const long* comp,
                     const long* ti, const long* tj, const long* tk, int npairs) noexcept nogil:
    cdef double l00 = g0[1], l01 = g0[2], l10 = g1[1], l11 = g1[2]
    cdef double det = l00 * l11 - l01 * l10
    cdef double i00, i01, i10, i11
    cdef double r0[MAXNC]
    cdef double r1[MAXNC]
    cdef int it, a, b
    cdef double s0, s1
    if fabs(det) <= SINGULAR_TOL:
        return -1
    i00 = l11 / det
    i11 = l00 / det
    i01 = -l01 / det
    i10 = -l10 / det
    memset(h0, 0, nc * sizeof(double))
    memset(h1, 0, nc * sizeof(double))
    if K == 0:
        return 0
    h0[1] = i00
    h0[2] = i01
    h1[1] = i10
    h1[2] = i11
    for it in range(K - 1):
        _powers(h0, h1, P, nc, parent, comp, ti, tj, tk, npairs)
        for b in range(nc):
            s0 = 0.0
            s1 = 0.0
            for a in range(3, nc):
                s0 += g0[a] * P[a * nc + b]
                s1 += g1[a] * P[a * nc + b]
            r0[b] = -s0
            r1[b] = -s1
        r0[1] += 1.0
        r1[2] += 1.0
        for b in range(nc):
            h0[b] = i00 * r0[b] + i01 * r1[b]
            h1[b] = i10 * r0[b] + i11 * r1[b]
    return 0


def _tables(int K):
    ti, tj, tk = mul_table(K)
    parent, comp = power_parents(K)
    return (np.ascontiguousarray(ti, dtype=np.int64), np.ascontiguousarray(tj, dtype=np.int64),
            np.ascontiguousarray(tk, dtype=np.int64), np.ascontiguousarray(parent, dtype=np.int64),
            np.ascontiguousarray(comp, dtype=np.int64))


def jet_mul(a, b, int K):
    cdef const double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64)
    cdef int N = A.shape[0], nc = ncoef(K), n
    out_arr = np.zeros((N, nc))
    cdef double[:, ::1] out = out_arr
    cdef long[::1] ti, tj, tk
    ti, tj, tk, _, _ = _tables(K)
    cdef int npairs = ti.shape[0]
    with nogil:
        for n in range(N):
            _mul(&A[n, 0], &B[n, 0], &out[n, 0], nc, &ti[0], &tj[0], &tk[0], npairs)
    return out_arr


def map_powers(delta, int K):
    cdef const double[:, :, ::1] D = np.ascontiguousarray(delta, dtype=np.float64)
    cdef int N = D.shape[0], nc = ncoef(K), n
    out_arr = np.zeros((N, nc, nc))
    cdef double[:, :, ::1] out = out_arr
    cdef long[::1] ti, tj, tk, parent, comp
    ti, tj, tk, parent, comp = _tables(K)
    cdef int npairs = ti.shape[0]
    with nogil:
        for n in range(N):
            _powers(&D[n, 0, 0], &D[n, 1, 0], &out[n, 0, 0], nc, &parent[0], &comp[0],
                    &ti[0], &tj[0], &tk[0], npairs)
    return out_arr


def map_invert(g, int K):
    if ncoef(K) > MAXNC:
        raise ValueError("jet order too high for compiled kernel")
    cdef const double[:, :, ::1] G = np.ascontiguousarray(g, dtype=np.float64)
    cdef int N = G.shape[0], nc = ncoef(K), n, bad = 0
    out_arr = np.zeros((N, 2, nc))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] P = np.zeros((nc, nc))
    cdef long[::1] ti, tj, tk, parent, comp
    ti, tj, tk, parent, comp = _tables(K)
    cdef int npairs = ti.shape[0]
    with nogil:
        for n in range(N):
            if _invert_one(&G[n, 0, 0], &G[n, 1, 0], &out[n, 0, 0], &out[n, 1, 0], nc, K,
                           &P[0, 0], &parent[0], &comp[0], &ti[0], &tj[0], &tk[0], npairs) != 0:
                bad = 1
                break
    if bad:
        raise ZeroDivisionError("singular linear part")
    return out_arr


def pullback_weights(g, int K, ell):
    if ncoef(K) > MAXNC:
        raise ValueError("jet order too high for compiled kernel")
    cdef const double[:, :, ::1] G = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[:, ::1] E = np.ascontiguousarray(ell, dtype=np.float64)
    cdef int N = G.shape[0], nc = ncoef(K), nf = E.shape[0], n, f, a, b, bad = 0
    cdef double s
    out_arr = np.zeros((N, nf, nc))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] P = np.zeros((nc, nc))
    cdef double[:, ::1] H = np.zeros((2, nc))
    cdef long[::1] ti, tj, tk, parent, comp
    ti, tj, tk, parent, comp = _tables(K)
    cdef int npairs = ti.shape[0]
    with nogil:
        for n in range(N):
            if _invert_one(&G[n, 0, 0], &G[n, 1, 0], &H[0, 0], &H[1, 0], nc, K,
                           &P[0, 0], &parent[0], &comp[0], &ti[0], &tj[0], &tk[0], npairs) != 0:
                bad = 1
                break
            _powers(&H[0, 0], &H[1, 0], &P[0, 0], nc, &parent[0], &comp[0],
                    &ti[0], &tj[0], &tk[0], npairs)
            for f in range(nf):
                for a in range(nc):
                    s = 0.0
                    for b in range(nc):
                        s += P[a, b] * E[f, b]
                    out[n, f, a] = s
    if bad:
        raise ZeroDivisionError("singular linear part")
    return out_arr
