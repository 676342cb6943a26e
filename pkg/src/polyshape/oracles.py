"""Radial reference values for the unit disk from Bessel characteristic equations.

Everything here is computed from power series in multiprecision with plain
bisection, independently of the Galerkin pipeline.
"""
from functools import lru_cache

import mpmath

DPS = 30


def bessel_j(nu, x):
    """``J_nu(x)`` from its power series."""
    with mpmath.workdps(DPS):
        x = mpmath.mpf(x)
        q = -(x / 2) ** 2
        term = (x / 2) ** nu / mpmath.factorial(nu)
        total = term
        k = 0
        while abs(term) > mpmath.mpf(10) ** (-DPS) * max(1, abs(total)):
            k += 1
            term = term * q / (k * (k + nu))
            total += term
        return total


def bessel_i(nu, x):
    """``I_nu(x)`` from its power series."""
    with mpmath.workdps(DPS):
        x = mpmath.mpf(x)
        q = (x / 2) ** 2
        term = (x / 2) ** nu / mpmath.factorial(nu)
        total = term
        k = 0
        while abs(term) > mpmath.mpf(10) ** (-DPS) * abs(total):
            k += 1
            term = term * q / (k * (k + nu))
            total += term
        return total


def _roots(f, count=None, xmax=None, start=0.25, step=0.25, tol=1e-22):
    """Sign changes of ``f`` on ``(start, xmax]`` (at most ``count``), refined by bisection."""
    out = []
    with mpmath.workdps(DPS):
        a = mpmath.mpf(start)
        fa = f(a)
        while (count is None or len(out) < count) and (xmax is None or a < xmax):
            b = a + step
            fb = f(b)
            if fa * fb < 0:
                lo, hi, flo = a, b, fa
                while hi - lo > tol:
                    mid = (lo + hi) / 2
                    fm = f(mid)
                    if flo * fm <= 0:
                        hi = mid
                    else:
                        lo, flo = mid, fm
                r = (lo + hi) / 2
                if xmax is None or r <= xmax:
                    out.append(r)
            a, fa = b, fb
    return out


def _j(nu):
    return lambda x: bessel_j(nu, x)


def _plate(nu):
    return lambda x: bessel_j(nu, x) * bessel_i(nu + 1, x) + bessel_j(nu + 1, x) * bessel_i(nu, x)


@lru_cache(maxsize=None)
def bessel_j_zeros(nu, count):
    """First ``count`` positive zeros of ``J_nu``."""
    return tuple(float(r) for r in _roots(_j(nu), count))


@lru_cache(maxsize=None)
def clamped_plate_roots(nu, count):
    """Roots of ``J_nu(k) I_{nu+1}(k) + J_{nu+1}(k) I_nu(k) = 0`` (disk clamped plate)."""
    return tuple(float(r) for r in _roots(_plate(nu), count))


def _radial(n, m):
    """``(function of nu, eigenvalue power)``: ``lambda = root ** power``."""
    if (n, m) == (1, 0):
        return _j, 2
    if (n, m) == (2, 1):
        # clamped buckling: u = J_nu(kr) - r^nu J_nu(k) with J_{nu+1}(k) = 0
        return (lambda nu: _j(nu + 1)), 2
    if (n, m) == (2, 0):
        return _plate, 4
    raise ValueError(f"no radial oracle for (n, m) = ({n}, {m})")


@lru_cache(maxsize=None)
def disk_eigenvalues(n, m, count):
    """First ``count`` disk eigenvalues of ``P_nm`` as ``(value, nu)`` pairs with
    multiplicity, for ``(n, m)`` in ``{(1, 0), (2, 0), (2, 1)}``.

    Angular order ``nu`` contributes multiplicity 1 for ``nu = 0`` and 2 otherwise.
    """
    fam, p = _radial(n, m)
    # first radial root of each angular order bounds the count-th eigenvalue
    firsts = []
    for nu in range(count):
        v = float(_roots(fam(nu), 1)[0]) ** p
        firsts.extend([v] * (1 if nu == 0 else 2))
    bound = sorted(firsts)[count - 1] * (1 + 1e-12)
    entries = []
    for nu in range(count):
        rs = _roots(fam(nu), xmax=bound ** (1.0 / p))
        if not rs:
            break
        for r in rs:
            entries.extend([(float(r) ** p, nu)] * (1 if nu == 0 else 2))
    entries.sort()
    return tuple(entries[:count])


def disk_cluster_pattern(n, m, count):
    """1-based index groups of equal disk eigenvalues among the first ``count``."""
    entries = disk_eigenvalues(n, m, count)
    groups, j = [], 0
    while j < len(entries):
        k = j
        while k + 1 < len(entries) and entries[k + 1][1] == entries[j][1] and \
                entries[k + 1][0] == entries[j][0]:
            k += 1
        groups.append(tuple(range(j + 1, k + 2)))
        j = k + 1
    return groups
