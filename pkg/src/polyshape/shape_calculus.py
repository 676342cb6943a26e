"""Boundary traces, shape derivatives of clustered eigenvalues, operator differentials.

All finite-difference checks share one protocol: central differences at
``t in FD_STEPS`` with two levels of Richardson extrapolation, and the map
``phi +- t psi`` re-checked for bi-Lipschitz regularity at every step.
"""
from dataclasses import dataclass, field
from math import comb, factorial
import json

import numpy as np

from . import kernels
from . import polynomials as poly
from ._multiindex import degrees, index_array, laplacian_power_functional
from .discretization import PolySet, assemble, cached_basis, eigensolve
from .geometry import boundary_sample, require_bilipschitz
from .quadrature import DEFAULT_M, disk_rule
from .spectrum import elementary_symmetric, make_cluster

FD_STEPS = (1e-3, 5e-4, 2.5e-4)
NORM_TOL = 1e-8
ORDER_RANGE = (1.5, 2.5)


@dataclass
class DerivativeReport:
    """Analytic differential against Richardson-extrapolated central differences.

    Array-valued quantities (pointwise checks) are compared in the max norm.
    ``fd_exact`` is set when the central differences agree to rounding at all
    steps (the quantity is quadratic in ``t``); the order estimate is then
    undefined and reported as ``nan``.
    """

    name: str
    formula: object
    fd: list
    steps: tuple
    richardson: object
    rel_err: float
    order: float
    fd_exact: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def order_ok(self):
        return self.fd_exact or ORDER_RANGE[0] <= self.order <= ORDER_RANGE[1]

    def passed(self, tol):
        return bool(self.rel_err <= tol and self.order_ok)

    def to_dict(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v
        return {"name": self.name, "formula": conv(self.formula), "fd": conv(self.fd),
                "steps": list(self.steps), "richardson": conv(self.richardson),
                "rel_err": self.rel_err, "order": None if np.isnan(self.order) else self.order,
                "fd_exact": self.fd_exact, **{k: conv(v) for k, v in self.extra.items()}}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def richardson(D):
    """Two-level Richardson extrapolation of central differences at ``t, t/2, t/4``."""
    D1, D2, D3 = D
    R1 = (4 * D2 - D1) / 3
    R2 = (4 * D3 - D2) / 3
    return (16 * R2 - R1) / 15


def make_report(name, formula, fd, steps=FD_STEPS, scale=0.0, extra=None):
    """Build a :class:`DerivativeReport`; ``scale`` floors the relative-error denominator."""
    formula = np.asarray(formula, dtype=float)
    fd = [np.asarray(v, dtype=float) for v in fd]
    R = richardson(fd)
    mag = max(float(np.max(np.abs(R), initial=0.0)), float(np.max(np.abs(formula), initial=0.0)))
    denom = max(mag, scale, 1e-300)
    rel = float(np.max(np.abs(formula - R), initial=0.0) / denom)
    e1 = float(np.max(np.abs(fd[0] - fd[1]), initial=0.0))
    e2 = float(np.max(np.abs(fd[1] - fd[2]), initial=0.0))
    noise = 1e-9 * denom
    exact = e1 <= noise and e2 <= noise
    order = float("nan") if exact or e2 == 0.0 else float(np.log2(e1 / e2))
    out = lambda v: float(v) if v.ndim == 0 else v
    return DerivativeReport(name, out(formula), [out(v) for v in fd], tuple(steps), out(R),
                            rel, order, exact, extra or {})


def central_differences(fun, phi, psi, steps=FD_STEPS):
    """``(f(phi + t psi) - f(phi - t psi)) / 2t`` for each step, bi-Lipschitz checked."""
    out = []
    for t in steps:
        plus, minus = phi.perturbed(psi, t), phi.perturbed(psi, -t)
        require_bilipschitz(plus)
        require_bilipschitz(minus)
        out.append((np.asarray(fun(plus)) - np.asarray(fun(minus))) / (2 * t))
    return out


# ---------------------------------------------------------------------------
# boundary traces


def _basis_coeffs(basis):
    return basis.coeffs if isinstance(basis, PolySet) else np.atleast_2d(np.asarray(basis, dtype=float))


def trace_matrix(basis, phi, samples, n):
    """``(len(samples), nb)``: ``d^n v / d nu^n`` for each raw basis row at the samples.

    Uses ``D^n u(x)[a, ..., a]`` with ``a = (grad phi(x))^{-1} nu``; this equals
    the normal derivative of ``v = u o phi^{-1}`` when ``u`` vanishes to order
    ``n - 1`` on the circle.
    """
    C = _basis_coeffs(basis)
    x = samples.x
    J = phi.jacobian(x)
    a = np.linalg.solve(J, samples.normal[:, :, None])[:, :, 0]
    tay = np.asarray(poly.taylor(C, x, n))
    sel = degrees(n) == n
    idx = index_array(n)[sel]
    mono = a[:, None, 0] ** idx[None, :, 0] * a[:, None, 1] ** idx[None, :, 1]
    return factorial(n) * np.einsum("ns,nbs->nb", mono, tay[:, :, sel])


def normal_derivative_n(coeffs, basis, phi, samples, n):
    """``d^n v / d nu^n`` at boundary samples for ``u = sum_k coeffs[k] * basis[k]``.

    ``coeffs`` is ``(nb,)`` or ``(nb, k)`` on the raw rows of ``basis``.
    """
    return trace_matrix(basis, phi, samples, n) @ np.asarray(coeffs, dtype=float)


def cluster_traces(cluster, result, phi, M=DEFAULT_M, psi=None, vectors=None):
    """Boundary samples and ``(len(samples), |F|)`` normal-derivative traces."""
    forms = result.forms
    X = result.vectors(cluster.indices) if vectors is None else np.asarray(vectors)
    G = X.T @ forms.A @ X
    err = float(np.abs(G - np.eye(G.shape[0])).max())
    if err > NORM_TOL:
        raise ValueError(f"cluster eigenvectors not energy-orthonormal (Gram error {err:.2e})")
    samples = boundary_sample(phi, M, psi)
    tr = normal_derivative_n(forms.raw_coefficients(X), forms.basis, phi, samples, forms.n)
    return samples, tr


# ---------------------------------------------------------------------------
# Hadamard formula, criticality, Lagrange multiplier


def hadamard_dLambda(cluster, result, phi, psi, h, M=DEFAULT_M, vectors=None):
    """Shape differential of ``Lambda_{F,h}`` along ``psi`` by boundary quadrature.

    ``-lambda_F^h C(|F|-1, h-1) sum_l int (d^n v_l/d nu^n)^2 zeta.nu dsigma``
    with energy-orthonormal ``v_l``.
    """
    cluster.require_separated()
    if not 1 <= h <= cluster.size:
        raise ValueError(f"h={h} outside 1..{cluster.size}")
    samples, tr = cluster_traces(cluster, result, phi, M, psi, vectors)
    S = np.sum(tr ** 2, axis=1)
    integral = float(np.dot(samples.weights, S * samples.normal_flux()))
    return -cluster.mean ** h * comb(cluster.size - 1, h - 1) * integral


def hadamard_gradient(cluster, result, phi, fields, h, M=DEFAULT_M):
    """Shape differentials of ``Lambda_{F,h}`` and of the area along each field.

    Equivalent to calling :func:`hadamard_dLambda` and
    :func:`~polyshape.geometry.volume_derivative` per field, sharing the traces.
    """
    cluster.require_separated()
    samples, tr = cluster_traces(cluster, result, phi, M)
    S = np.sum(tr ** 2, axis=1)
    pref = -cluster.mean ** h * comb(cluster.size - 1, h - 1)
    dL, dV = [], []
    for psi in fields:
        flux = np.einsum("ij,ij->i", psi(samples.x), samples.normal)
        dL.append(pref * float(np.dot(samples.weights, S * flux)))
        dV.append(float(np.dot(samples.weights, flux)))
    return np.array(dL), np.array(dV)


@dataclass
class CriticalityReport:
    """``S(y) = sum_l (d^n v_l / d nu^n)^2`` on the boundary against its mean ``C``."""

    indices: tuple
    S: np.ndarray
    C: float
    residual: float
    degenerate: bool
    rtol: float

    def to_dict(self):
        return {"F": list(self.indices), "C": self.C, "residual": self.residual,
                "degenerate": self.degenerate, "S_min": float(self.S.min()),
                "S_max": float(self.S.max()), "cluster_rtol": self.rtol}


def criticality_residual(cluster, result, phi, M=DEFAULT_M):
    """Normalized residual ``max |S - C| / C`` of the overdetermined boundary condition."""
    cluster.require_separated()
    samples, tr = cluster_traces(cluster, result, phi, M)
    S = np.sum(tr ** 2, axis=1)
    C = float(np.dot(samples.weights, S) / samples.perimeter)
    degenerate = not C > 1e-14 * max(1.0, float(S.max(initial=0.0)))
    resid = float("inf") if degenerate else float(np.max(np.abs(S - C)) / C)
    return CriticalityReport(cluster.indices, S, C, resid, degenerate, cluster.rtol)


@dataclass
class LagrangeFit:
    """Multiplier ``c`` with ``dLambda = c dV`` and the worst relative violation."""

    c: float
    deviation: float
    ratios: list
    dLambda: list
    dV: list
    degenerate: bool

    def __iter__(self):
        return iter((self.c, self.deviation))

    def to_dict(self):
        return {"c": self.c, "deviation": self.deviation, "ratios": self.ratios,
                "dLambda": self.dLambda, "dV": self.dV, "degenerate": self.degenerate}


def lagrange_fit(cluster, result, phi, fields, h=1, M=DEFAULT_M):
    """Fit ``dLambda_{F,h}[psi] = c dV[psi]`` over ``fields``.

    Fields with ``|dV|`` at rounding level relative to ``int |zeta.nu|`` carry no
    ratio; they contribute ``|dLambda| / (|c| int |zeta.nu|)`` to the deviation.
    """
    if not fields:
        raise ValueError("no fields given")
    dL, dV, flux_l1 = [], [], []
    for psi in fields:
        samples = boundary_sample(phi, M, psi)
        fl = samples.normal_flux()
        dL.append(hadamard_dLambda(cluster, result, phi, psi, h, M))
        dV.append(float(np.dot(samples.weights, fl)))
        flux_l1.append(float(np.dot(samples.weights, np.abs(fl))))
    flux_l1 = np.array(flux_l1)
    if np.all(flux_l1 <= 1e-12):
        raise ValueError("all fields are tangential; no information")
    dL, dV = np.array(dL), np.array(dV)
    has_ratio = np.abs(dV) > 1e-10 * np.maximum(flux_l1, 1e-300)
    if not has_ratio.any():
        raise ValueError("no field with nonzero volume derivative")
    ratios = dL[has_ratio] / dV[has_ratio]
    c = float(ratios.mean())
    dev = float(np.max(np.abs(ratios - c)) / abs(c)) if c != 0.0 else float("inf")
    for k in np.flatnonzero(~has_ratio):
        if flux_l1[k] > 1e-12:
            dev = max(dev, float(abs(dL[k]) / (abs(c) * flux_l1[k])))
    degenerate = len(fields) == 1
    if degenerate:
        dev = 0.0
    return LagrangeFit(c, dev, ratios.tolist(), dL.tolist(), dV.tolist(), degenerate)


# ---------------------------------------------------------------------------
# finite-difference verification of eigenvalue-cluster derivatives


def cluster_objective(phi, n, m, F, h, d=None, quad=None):
    """``Lambda_{F,h}`` of the discrete problem on ``phi(D)`` (labels ``F`` by index)."""
    basis = cached_basis(n) if d is None else cached_basis(n, d)
    res = eigensolve(assemble(phi, n, m, basis, quad or disk_rule()), max(F))
    return elementary_symmetric(res.eigenvalues[min(F) - 1:max(F)], h)


def hadamard_check(phi, psi, n, m, F, h, d=None, quad=None, M=DEFAULT_M, steps=FD_STEPS):
    """Hadamard formula against central differences of ``Lambda_{F,h}(phi + t psi)``."""
    basis = cached_basis(n) if d is None else cached_basis(n, d)
    quad = quad or disk_rule()
    res = eigensolve(assemble(phi, n, m, basis, quad), max(F))
    cl = make_cluster(res, F)
    formula = hadamard_dLambda(cl, res, phi, psi, h, M)
    fd = central_differences(lambda p: cluster_objective(p, n, m, F, h, d, quad), phi, psi, steps)
    scale = cl.mean ** h
    return make_report("hadamard", formula, fd, steps, 1e-9 * scale,
                       {"F": list(F), "h": h, "n": n, "m": m, "lambda_F": cl.mean,
                        "spread": cl.spread, "gap": cl.gap, "fingerprint": res.fingerprint})


# ---------------------------------------------------------------------------
# operator-level differentials


def _inverse_powers(phi, x, K):
    """Jets of ``phi^{-1}`` at ``phi(x)`` as power tables ``(N, nc, nc)``."""
    gj = phi.jets(x, K)
    hinv = kernels.map_invert(gj, K)
    return kernels.map_powers(hinv, K)


def _v_jets(coeffs, phi, x, K):
    """Jets of ``v = u o phi^{-1}`` at ``phi(x)``: ``(N, ncomp, ncoef(K))``."""
    P = _inverse_powers(phi, x, K)
    return np.einsum("nca,nab->ncb", poly.taylor(coeffs, x, K), P)


def d_det_check(phi, psi, quad=None, steps=FD_STEPS):
    """``div(zeta) det grad phi`` against central differences of ``det grad(phi + t psi)``."""
    quad = quad or disk_rule(8, 16)
    x = quad.nodes

    def det(p):
        J = p.jacobian(x)
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    J = phi.jacobian(x)
    dpsi = psi.jacobian(x)
    # grad zeta = grad psi (grad phi)^{-1}
    div = np.einsum("nii->n", dpsi @ np.linalg.inv(J))
    formula = div * det(phi)
    fd = central_differences(det, phi, psi, steps)
    return make_report("d_det", formula, fd, steps, 1e-12 * float(np.abs(det(phi)).max()))


def laplacian_differential(phi, psi, u, x):
    """Differential of ``Delta_phi u`` along ``psi`` at reference points ``x``.

    ``-2 sum_ij d_ij v d_i zeta_j - sum_j d_j v Delta zeta_j`` evaluated at
    ``phi(x)``, with ``v = u o phi^{-1}`` and ``zeta = psi o phi^{-1}``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = _v_jets(u, phi, x, 2)[:, 0, :]
    z = _v_jets(psi.coeffs, phi, x, 2)
    # Taylor slots: 1 -> x, 2 -> y, 3 -> xx, 4 -> xy, 5 -> yy
    H = np.stack([np.stack([2 * v[:, 3], v[:, 4]], 1), np.stack([v[:, 4], 2 * v[:, 5]], 1)], 1)
    Dz = z[:, :, 1:3]  # [n, j, i] = d zeta_j / d y_i
    lap_z = 2 * (z[:, :, 3] + z[:, :, 5])
    return -2 * np.einsum("nij,nji->n", H, Dz) - np.einsum("nj,nj->n", v[:, 1:3], lap_z)


def pullback_laplacian(phi, u, x, s=1):
    """``Delta_phi^s u`` at reference points ``x``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    K = 2 * s
    ell = laplacian_power_functional(K, s)[None, :]
    w = kernels.pullback_weights(phi.jets(x, K), K, ell)[:, 0, :]
    return np.einsum("na,na->n", w, poly.taylor(u, x, K)[:, 0, :])


def d_laplacian_check(phi, psi, u, x=None, steps=FD_STEPS):
    """Differential of ``Delta_phi u`` against central differences at points ``x``."""
    if x is None:
        x = disk_rule(6, 12).nodes
    formula = laplacian_differential(phi, psi, u, x)
    fd = central_differences(lambda p: pullback_laplacian(p, u, x), phi, psi, steps)
    base = float(np.abs(pullback_laplacian(phi, u, x)).max())
    return make_report("d_laplacian", formula, fd, steps, 1e-9 * max(base, 1e-300))


def polyform_differential(phi, psi, u1, u2, n, quad=None, M=DEFAULT_M):
    """Differential of the energy entry ``(-Delta_phi)^n[u1][u2]`` along ``psi``.

    Boundary term ``-int d^n v1 d^n v2 zeta.nu`` plus volume term
    ``-int ((-Delta)^n v1 grad v2 + (-Delta)^n v2 grad v1) . zeta``.
    ``u1``, ``u2`` must vanish to order ``n - 1`` on the unit circle.
    """
    if 2 * n > 6:
        raise ValueError(f"jet order {2 * n} > 6 unsupported")
    quad = quad or disk_rule()
    U = np.vstack([np.atleast_2d(u1), np.atleast_2d(u2)])
    samples = boundary_sample(phi, M, psi)
    tr = trace_matrix(U, phi, samples, n)
    boundary = -float(np.dot(samples.weights, tr[:, 0] * tr[:, 1] * samples.normal_flux()))
    x = quad.nodes
    K = 2 * n
    V = _v_jets(U, phi, x, K)
    ell = (-1) ** n * laplacian_power_functional(K, n)
    Ln = V @ ell  # (N, 2)
    grad = V[:, :, 1:3]
    zeta = psi(x)
    J = phi.jacobian(x)
    jac = np.abs(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
    integrand = (Ln[:, 0] * np.einsum("ni,ni->n", grad[:, 1], zeta)
                 + Ln[:, 1] * np.einsum("ni,ni->n", grad[:, 0], zeta))
    volume_term = -float(np.dot(quad.weights * jac, integrand))
    return boundary + volume_term, boundary, volume_term


def energy_entry(phi, u1, u2, n, quad=None):
    """``(-Delta_phi)^n[u1][u2]`` by the same quadrature as the assembled matrices."""
    U = PolySet(np.vstack([np.atleast_2d(u1), np.atleast_2d(u2)]))
    forms = assemble(phi, n, 0, U, quad or disk_rule(), orthonormalize=False)
    return float(forms.A[0, 1])


def d_polyform_check(phi, psi, u1, u2, n, quad=None, M=DEFAULT_M, steps=FD_STEPS):
    """Boundary-plus-volume formula against central differences of the assembled entry."""
    quad = quad or disk_rule()
    total, bterm, vterm = polyform_differential(phi, psi, u1, u2, n, quad, M)
    fd = central_differences(lambda p: energy_entry(p, u1, u2, n, quad), phi, psi, steps)
    scale = 1e-9 * max(abs(energy_entry(phi, u1, u1, n, quad)), abs(energy_entry(phi, u2, u2, n, quad)))
    return make_report("d_polyform", total, fd, steps, scale,
                       {"boundary_term": bterm, "volume_term": vterm, "n": n})


def d_volume_check(phi, psi, quad=None, M=DEFAULT_M, steps=FD_STEPS):
    """Boundary flux of ``zeta`` against central differences of the area."""
    from .geometry import volume, volume_derivative
    formula = volume_derivative(phi, psi, M)
    fd = central_differences(lambda p: volume(p, quad), phi, psi, steps)
    return make_report("d_volume", formula, fd, steps, 1e-12 * volume(phi, quad))
