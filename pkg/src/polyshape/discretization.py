"""Conforming Galerkin discretization of the pulled-back poly-harmonic forms.

The trial space on the reference disk is ``(1 - r^2)^n * P_d`` (all polynomials
of total degree ``<= d``), so every function and its derivatives up to order
``n - 1`` vanish on the unit circle. On ``phi(D)`` the space is its push-forward
``{u o phi^{-1}}``; the forms are evaluated on the reference disk through jets
of ``u o phi^{-1}`` at every quadrature node.
"""
from concurrent.futures import ThreadPoolExecutor
import contextlib
import contextvars
from dataclasses import dataclass, field
import hashlib
import struct

import numpy as np
from scipy import linalg

from . import kernels
from . import polynomials as poly
from ._multiindex import form_functionals, index, multi_indices, ncoef
from .errors import NotCoercive, SingularJacobian
from .geometry import require_bilipschitz
from .quadrature import disk_rule

MAX_N = 3
DEFAULT_DEGREE = 16
CHUNK = 512

_workers = contextvars.ContextVar("polyshape_workers", default=1)


def get_workers():
    return _workers.get()


@contextlib.contextmanager
def workers(k):
    """Run assembly with ``k`` worker threads inside the block."""
    if k < 1:
        raise ValueError("need at least one worker")
    token = _workers.set(int(k))
    try:
        yield
    finally:
        _workers.reset(token)


@dataclass(frozen=True, eq=False)
class PolySet:
    """A list of scalar polynomials (rows of ``coeffs``) used as trial functions."""

    coeffs: np.ndarray
    vanishing_order: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return self.coeffs.shape[0]

    @property
    def degree(self):
        return poly.degree_of_length(self.coeffs.shape[1])

    def taylor(self, pts, K):
        """``(N, ncoef(K), nb)`` Taylor coefficients of every function at ``pts``."""
        return np.ascontiguousarray(poly.taylor(self.coeffs, pts, K).transpose(0, 2, 1))

    def node_taylor(self, quad, K):
        key = ("taylor", quad.G, quad.M)
        hit = self._cache.get(key)
        if hit is None or hit.shape[1] < ncoef(K):
            hit = self.taylor(quad.nodes, K)
            self._cache[key] = hit
        return hit[:, :ncoef(K)]

    def evaluate(self, pts):
        return poly.evaluate(self.coeffs, pts)


@dataclass(frozen=True, eq=False)
class BasisSet(PolySet):
    """``(1 - r^2)^n * P_a(x) P_b(y)`` for ``a + b <= d`` (Legendre factors).

    Same span as ``(1 - r^2)^n x^a y^b``; the Legendre factors only improve the
    conditioning of the raw Gram matrices.
    """

    n: int = 1
    d: int = DEFAULT_DEGREE
    family: str = "legendre"

    @property
    def exponents(self):
        return multi_indices(self.d)

    def transform(self, quad):
        """Basis change ``T`` with ``T^T A_identity T = I`` (energy-orthonormal on the disk)."""
        key = ("T", quad.G, quad.M)
        if key not in self._cache:
            A0 = _gram(self.node_taylor(quad, _needed_order(self.n)), quad, None, self.n,
                       np.ones(quad.size))
            s = 1.0 / np.sqrt(np.diag(A0))
            try:
                L = linalg.cholesky(A0 * s[:, None] * s[None, :], lower=True)
            except linalg.LinAlgError as exc:
                raise NotCoercive(f"reference energy matrix not positive definite: {exc}") from None
            T = s[:, None] * linalg.solve_triangular(L, np.eye(len(self)), lower=True).T
            self._cache[key] = T
        return self._cache[key]


def build_basis(n, d=DEFAULT_DEGREE, family="legendre"):
    """Conforming basis of ``W^{n,2}_0`` on the unit disk with ``(d+1)(d+2)/2`` functions."""
    if not 1 <= n <= MAX_N:
        raise ValueError(f"operator order n={n} unsupported (need 1 <= n <= {MAX_N})")
    if d < 0:
        raise ValueError("degree must be non-negative")
    bubble = poly.power_of_one_minus_r2(n)
    D = d + 2 * n
    rows = []
    for a, b in multi_indices(d):
        if family == "legendre":
            p = poly.legendre_product(a, b)
        elif family == "monomial":
            p = np.zeros(ncoef(a + b))
            p[index(a, b)] = 1.0
        else:
            raise ValueError(f"unknown basis family {family!r}")
        rows.append(poly.resize(poly.multiply(bubble, p), D))
    return BasisSet(np.array(rows), n - 1, n=n, d=d, family=family)


def _needed_order(power):
    s, odd = divmod(power, 2)
    return 2 * s + odd


def _chunks(N):
    return [slice(i, min(i + CHUNK, N)) for i in range(0, N, CHUNK)]


def form_values(phi, power, taylor, nodes):
    """Pulled-back form integrand factors at each node.

    Returns ``(N, nf, nb)``: ``Delta^s v`` (even power ``2s``) or the two
    components of ``grad Delta^s v`` (odd power ``2s+1``) for ``v = u o phi^{-1}``,
    evaluated at ``phi(node)``, for every function ``u``.
    """
    ell, K = form_functionals(power)
    if K == 0:
        return taylor[:, :1, :]
    gj = phi.jets(nodes, K)
    try:
        w = kernels.pullback_weights(gj, K, ell)
    except ZeroDivisionError:
        raise SingularJacobian("singular Jacobian at a quadrature node") from None
    return np.einsum("nfa,nab->nfb", w, taylor[:, :ncoef(K), :])


def _gram(taylor, quad, phi, power, jac):
    """Assemble ``sum_nodes w |det| <F_i, F_j>`` with a fixed chunked reduction order."""
    from .geometry import DomainMap

    phi = phi if phi is not None else DomainMap.identity()
    N = quad.size
    wq = quad.weights * jac

    def part(sl):
        F = form_values(phi, power, taylor[sl], quad.nodes[sl])
        Fw = F * wq[sl, None, None]
        out = np.zeros((F.shape[2], F.shape[2]))
        for f in range(F.shape[1]):
            out += F[:, f, :].T @ Fw[:, f, :]
        return out

    chunks = _chunks(N)
    k = get_workers()
    if k == 1:
        parts = [part(sl) for sl in chunks]
    else:
        with ThreadPoolExecutor(max_workers=k) as ex:
            parts = list(ex.map(part, chunks))
    total = np.zeros_like(parts[0])
    for p in parts:
        total += p
    return total


@dataclass(frozen=True, eq=False)
class AssembledForms:
    """Matrices of ``(-Delta_phi)^n`` (``A``) and ``(-Delta_phi)^m`` (``B``) on a basis.

    ``A`` is also the Gram matrix of the pulled-back energy scalar product.
    ``transform`` maps coefficients in the assembled (orthonormalized) basis to
    coefficients on the raw polynomial rows of ``basis``.
    """

    A: np.ndarray
    B: np.ndarray
    n: int
    m: int
    basis: PolySet
    quad: object
    phi: object
    transform: np.ndarray
    fingerprint: str

    def raw_coefficients(self, x):
        """Coefficients on ``basis.coeffs`` rows for assembled-basis vectors ``x``."""
        return self.transform @ x

    def to_csv(self, path_A, path_B):
        hdr = f"fingerprint={self.fingerprint} n={self.n} m={self.m}"
        np.savetxt(path_A, self.A, delimiter=",", fmt="%.17g", header=hdr)
        np.savetxt(path_B, self.B, delimiter=",", fmt="%.17g", header=hdr)


def fingerprint(phi, n, m, d, quad):
    h = hashlib.blake2b(digest_size=8)
    h.update(phi.fingerprint_bytes())
    h.update(struct.pack("<5q", n, m, d, quad.G, quad.M))
    return h.hexdigest()


def assemble(phi, n, m, basis=None, quad=None, orthonormalize=True):
    """Assemble the pair ``(A, B)`` for ``(-Delta)^n u = lambda (-Delta)^m u`` on ``phi(D)``.

    ``basis`` may be a :class:`BasisSet` (orthonormalized against ``A`` at the
    identity when ``orthonormalize``) or any :class:`PolySet` (used as is).
    """
    if not 0 <= m < n <= MAX_N:
        raise ValueError(f"need 0 <= m < n <= {MAX_N}, got n={n}, m={m}")
    quad = quad or disk_rule()
    basis = basis if basis is not None else build_basis(n)
    require_bilipschitz(phi, None)
    J = phi.jacobian(quad.nodes)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    jac = np.abs(det)
    Kmax = _needed_order(n)
    taylor = basis.node_taylor(quad, Kmax)
    if orthonormalize and isinstance(basis, BasisSet):
        if basis.n != n:
            raise ValueError("basis was built for a different operator order")
        T = basis.transform(quad)
        key = ("taylorT", quad.G, quad.M, Kmax)
        if key not in basis._cache:
            basis._cache[key] = np.ascontiguousarray(taylor @ T)
        taylor = basis._cache[key]
    else:
        T = np.eye(len(basis))
    A = _gram(taylor, quad, phi, n, jac)
    B = _gram(taylor, quad, phi, m, jac)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    d = getattr(basis, "d", basis.degree)
    return AssembledForms(A, B, n, m, basis, quad, phi, T, fingerprint(phi, n, m, d, quad))


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Ascending eigenvalues with energy-orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    forms: AssembledForms
    count: int

    @property
    def values(self):
        return self.eigenvalues[:self.count]

    @property
    def fingerprint(self):
        return self.forms.fingerprint

    def vectors(self, indices):
        """Eigenvectors for 1-based eigenvalue labels."""
        return self.eigenvectors[:, [j - 1 for j in indices]]

    def gram_error(self, indices=None):
        X = self.eigenvectors if indices is None else self.vectors(indices)
        return float(np.abs(X.T @ self.forms.A @ X - np.eye(X.shape[1])).max())


def eigensolve(forms, count=None):
    """Solve ``A u = lambda B u`` by Cholesky reduction of ``A``.

    With ``A = L L^T`` the reduced matrix ``L^{-1} B L^{-T}`` is the discrete
    ``T_phi``; its eigenvalues are ``mu = 1/lambda``. Eigenvectors come back
    ``A``-orthonormal.
    """
    nb = forms.A.shape[0]
    count = nb if count is None else count
    if count > nb or count < 1:
        raise ValueError(f"requested {count} eigenvalues from a basis of size {nb}")
    try:
        L = linalg.cholesky(forms.A, lower=True)
    except linalg.LinAlgError as exc:
        raise NotCoercive(f"energy matrix not positive definite: {exc}") from None
    Y = linalg.solve_triangular(L, forms.B, lower=True)
    C = linalg.solve_triangular(L, Y.T, lower=True)
    C = 0.5 * (C + C.T)
    mu, Z = linalg.eigh(C)
    order = np.argsort(-mu, kind="stable")
    mu, Z = mu[order], Z[:, order]
    pos = mu > 0
    mu, Z = mu[pos], Z[:, pos]
    if mu.size < count:
        raise NotCoercive("fewer positive eigenvalues than requested")
    X = linalg.solve_triangular(L.T, Z, lower=False)
    # fix the sign convention: largest-magnitude component positive
    sgn = np.sign(X[np.argmax(np.abs(X), axis=0), np.arange(X.shape[1])])
    X = X * np.where(sgn == 0, 1.0, sgn)
    return SpectralResult(1.0 / mu, X, forms, count)


def solve(phi, n, m, d=DEFAULT_DEGREE, G=None, M=None, count=None):
    """Convenience pipeline: build basis, assemble, eigensolve."""
    quad = disk_rule(G or disk_rule().G, M or disk_rule().M)
    basis = cached_basis(n, d)
    return eigensolve(assemble(phi, n, m, basis, quad), count)


_BASIS_CACHE = {}


def cached_basis(n, d=DEFAULT_DEGREE, family="legendre"):
    key = (n, d, family)
    if key not in _BASIS_CACHE:
        _BASIS_CACHE[key] = build_basis(n, d, family)
    return _BASIS_CACHE[key]
