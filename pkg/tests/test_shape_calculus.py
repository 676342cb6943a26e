from math import factorial

import numpy as np
import pytest

from polyshape import shape_calculus as sc
from polyshape.discretization import assemble, build_basis, cached_basis, eigensolve
from polyshape.errors import ClusterGapError
from polyshape.geometry import DomainMap, PerturbationField as PF, boundary_sample
from polyshape import polynomials as poly
from polyshape.quadrature import disk_rule
from polyshape.spectrum import make_cluster

PAIRS = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]
ZERO = PF(np.zeros((2, 3)))
NEAR = DomainMap.identity().perturbed(PF.harmonic_gradient(2) * 0.05 + PF.radial(1) * 0.03, 1)
TREFOIL = DomainMap.identity().perturbed(PF.harmonic_gradient(3) * 0.04, 1)
PSI = PF.harmonic_gradient(2) + PF.radial(1) * 0.5 + PF.harmonic_gradient(3, "im") * 0.3


def _solve(phi, n, m, count, d=16):
    return eigensolve(assemble(phi, n, m, cached_basis(n, d)), count)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_trace_of_bubble_functions(n):
    basis = build_basis(n, 3)
    bs = boundary_sample(DomainMap.identity(), 32)
    tr = sc.trace_matrix(basis, DomainMap.identity(), bs, n)
    # d^n/dr^n (1 - r^2)^n p at r = 1 is (-2)^n n! p
    p = np.array([poly.evaluate(poly.legendre_product(a, b), bs.x) for a, b in basis.exponents]).T
    np.testing.assert_allclose(tr, (-2) ** n * factorial(n) * p, atol=1e-11)


def test_first_eigenfunction_trace_is_constant():
    res = _solve(DomainMap.identity(), 1, 0, 1)
    cl = make_cluster(res, (1,))
    _, tr = sc.cluster_traces(cl, res, DomainMap.identity())
    assert np.ptp(tr) <= 1e-8 * np.abs(tr).max()


@pytest.mark.parametrize("phi", [DomainMap.identity(), DomainMap.ellipse(0.2)], ids=["disk", "ellipse"])
def test_first_order_trace_against_finite_differences(phi):
    res = _solve(phi, 1, 0, 2)
    forms = res.forms
    c = forms.raw_coefficients(res.eigenvectors[:, 1])
    bs = boundary_sample(phi, 32)
    got = sc.normal_derivative_n(c, forms.basis, phi, bs, 1)
    A = phi.jacobian(np.zeros((1, 2)))[0]  # both maps are linear

    def v(y):
        return forms.basis.evaluate(np.linalg.solve(A, y.T).T) @ c

    def D(h):
        return (v(bs.y) - v(bs.y - h * bs.normal)) / h

    extrap = 2 * D(5e-5) - D(1e-4)
    np.testing.assert_allclose(got, extrap, atol=1e-6 * np.abs(got).max())


@pytest.mark.parametrize("n,m", PAIRS)
def test_dilation_derivative(n, m):
    res = _solve(DomainMap.identity(), n, m, 2)
    cl = make_cluster(res, (1,))
    dL = sc.hadamard_dLambda(cl, res, DomainMap.identity(), PF.dilation(), 1)
    lam = res.eigenvalues[0]
    assert dL == pytest.approx(-2 * (n - m) * lam, rel=1e-5)
    assert dL < 0


@pytest.mark.parametrize("n,m", [(1, 0), (2, 1), (3, 0)])
def test_boundary_energy_normalizations(n, m):
    res = _solve(DomainMap.identity(), n, m, 2)
    cl = make_cluster(res, (1,))
    bs, tr = sc.cluster_traces(cl, res, DomainMap.identity())
    lam = res.eigenvalues[0]
    # energy-normalized: 2(n - m); lower-order-normalized (v * sqrt(lam)): 2(n - m) lam
    assert np.dot(bs.weights, tr[:, 0] ** 2) == pytest.approx(2 * (n - m), rel=1e-5)
    assert np.dot(bs.weights, lam * tr[:, 0] ** 2) == pytest.approx(2 * (n - m) * lam, rel=1e-5)


@pytest.mark.parametrize("n,m", [(1, 0), (2, 1)])
def test_rotation_field_gives_zero(n, m):
    res = _solve(DomainMap.identity(), n, m, 2)
    dL = sc.hadamard_dLambda(make_cluster(res, (1,)), res, DomainMap.identity(), PF.rotation(), 1)
    assert abs(dL) <= 1e-9 * res.eigenvalues[0]


def test_rigid_rotation_of_generic_shape():
    # phi + t (rotation field) is a first-order rigid motion, so the derivative vanishes
    res = _solve(NEAR, 1, 0, 2)
    dL = sc.hadamard_dLambda(make_cluster(res, (1,)), res, NEAR,
                             PF.from_terms(*_rotation_composed(NEAR)), 1)
    assert abs(dL) <= 1e-8 * res.eigenvalues[0]


def _rotation_composed(phi):
    """Coefficients of ``psi = (-phi_y, phi_x)``: the field rotating the image rigidly."""
    from polyshape._multiindex import multi_indices
    idx = multi_indices(phi.degree)
    tx = {ab: -phi.coeffs[1, k] for k, ab in enumerate(idx)}
    ty = {ab: phi.coeffs[0, k] for k, ab in enumerate(idx)}
    return tx, ty


def test_cluster_basis_invariance():
    res = _solve(DomainMap.identity(), 1, 0, 4)
    cl = make_cluster(res, (2, 3))
    X = res.vectors((2, 3))
    th = 0.83
    Q = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    a = sc.hadamard_dLambda(cl, res, DomainMap.identity(), PSI, 1)
    b = sc.hadamard_dLambda(cl, res, DomainMap.identity(), PSI, 1, vectors=X @ Q)
    assert b == pytest.approx(a, rel=1e-10, abs=1e-12 * res.eigenvalues[1])


def test_linearity_in_field():
    res = _solve(TREFOIL, 2, 0, 4)
    cl = make_cluster(res, (2, 3))
    p1, p2 = PF.harmonic_gradient(2), PF.radial(1)
    f = lambda p: sc.hadamard_dLambda(cl, res, TREFOIL, p, 2)
    combo = f(p1 * 1.5 + p2 * -0.7)
    assert combo == pytest.approx(1.5 * f(p1) - 0.7 * f(p2), rel=1e-10)


def test_gap_refusal_inside_double_eigenvalue():
    res = _solve(DomainMap.identity(), 1, 0, 4)
    with pytest.raises(ClusterGapError):
        sc.hadamard_dLambda(make_cluster(res, (2,)), res, DomainMap.identity(), PSI, 1)


def test_normalization_is_enforced():
    res = _solve(DomainMap.identity(), 1, 0, 2)
    cl = make_cluster(res, (1,))
    with pytest.raises(ValueError):
        sc.hadamard_dLambda(cl, res, DomainMap.identity(), PSI, 1, vectors=2 * res.vectors((1,)))
    with pytest.raises(ValueError):
        sc.hadamard_dLambda(cl, res, DomainMap.identity(), PSI, 2)


def test_hadamard_against_finite_differences():
    rep = sc.hadamard_check(NEAR, PF.harmonic_gradient(3) + PF.radial(1) * 0.4, 1, 0, (1,), 1, d=10,
                            quad=disk_rule(24, 48))
    assert rep.rel_err <= 1e-5
    assert 1.5 <= rep.order <= 2.5
    assert rep.passed(1e-5)
    assert '"rel_err"' in rep.to_json()


@pytest.mark.parametrize("n,m", PAIRS)
def test_disk_is_critical_for_first_eigenvalue(n, m):
    res = _solve(DomainMap.identity(), n, m, 2)
    rep = sc.criticality_residual(make_cluster(res, (1,)), res, DomainMap.identity())
    assert rep.residual <= 1e-6 and not rep.degenerate


@pytest.mark.parametrize("n,m", [(1, 0), (2, 0), (2, 1)])
def test_disk_is_critical_for_double_cluster(n, m):
    res = _solve(DomainMap.identity(), n, m, 4)
    cl = make_cluster(res, (2, 3))
    rep = sc.criticality_residual(cl, res, DomainMap.identity())
    assert rep.residual <= 1e-5
    _, tr = sc.cluster_traces(cl, res, DomainMap.identity())
    single = tr[:, 0] ** 2
    assert np.ptp(single) > 0.1 * single.mean()


def test_ellipse_is_not_critical():
    res = _solve(DomainMap.ellipse(0.3), 1, 0, 2)
    assert sc.criticality_residual(make_cluster(res, (1,)), res, DomainMap.ellipse(0.3)).residual >= 0.05


FIELDS = [PF.dilation(), PF.radial(1), PF.radial(2), PF.harmonic_gradient(2), PF.harmonic_gradient(3, "im"),
          PF.random(3, 5)]


def test_lagrange_on_disk():
    res = _solve(DomainMap.identity(), 2, 0, 2)
    fit = sc.lagrange_fit(make_cluster(res, (1,)), res, DomainMap.identity(), FIELDS, 1)
    c, dev = fit
    assert dev <= 1e-4
    assert c == pytest.approx(-2 * 2 * res.eigenvalues[0] / (2 * np.pi), rel=1e-5)


def test_lagrange_on_ellipse():
    res = _solve(DomainMap.ellipse(0.3), 1, 0, 2)
    _, dev = sc.lagrange_fit(make_cluster(res, (1,)), res, DomainMap.ellipse(0.3), FIELDS, 1)
    assert dev >= 0.05


def test_lagrange_degenerate_inputs():
    res = _solve(DomainMap.ellipse(0.3), 1, 0, 2)
    cl = make_cluster(res, (1,))
    fit = sc.lagrange_fit(cl, res, DomainMap.ellipse(0.3), [PF.radial(1)], 1)
    assert fit.degenerate and fit.deviation == 0.0
    with pytest.raises(ValueError):
        sc.lagrange_fit(cl, res, DomainMap.identity(), [PF.rotation()], 1)
    with pytest.raises(ValueError):
        sc.lagrange_fit(cl, res, DomainMap.identity(), [], 1)


def test_d_det_examples():
    rep = sc.d_det_check(DomainMap.identity(), PF.dilation())
    np.testing.assert_allclose(rep.formula, 2.0, rtol=0, atol=1e-15)
    assert rep.rel_err <= 1e-12 and rep.fd_exact
    rep = sc.d_det_check(DomainMap.identity(), PF.rotation())
    assert np.abs(rep.formula).max() <= 1e-15
    rep = sc.d_det_check(NEAR, PF.random(3, 9))
    assert rep.rel_err <= 1e-7


def test_d_laplacian_examples():
    u = build_basis(1, 4).coeffs[7]
    x = disk_rule(6, 12).nodes
    assert np.all(sc.laplacian_differential(NEAR, ZERO, u, x) == 0)
    # Delta_{(1+t) id} u = (1+t)^{-2} Delta u, so the derivative is -2 Delta u
    lap = poly.evaluate(poly.laplacian(u), x)
    np.testing.assert_allclose(sc.laplacian_differential(DomainMap.identity(), PF.dilation(), u, x), -2 * lap,
                               atol=1e-12 * np.abs(lap).max())
    rep = sc.d_laplacian_check(NEAR, PF.random(3, 4), u)
    assert rep.rel_err <= 1e-6 and rep.order_ok


def test_d_polyform_examples():
    B = cached_basis(2, 4)
    u1, u2 = B.coeffs[3], B.coeffs[8]
    total, bterm, vterm = sc.polyform_differential(NEAR, ZERO, u1, u2, 2)
    assert total == 0 and bterm == 0 and vterm == 0
    rep = sc.d_polyform_check(DomainMap.identity(), PF.rotation(), u1, u2, 2)
    assert abs(rep.extra["boundary_term"]) <= 1e-12
    assert abs(rep.formula - rep.richardson) <= 1e-6
    rep = sc.d_polyform_check(NEAR, PF.random(3, 8), u1, u2, 2, quad=disk_rule(24, 48))
    assert rep.rel_err <= 1e-5 and 1.5 <= rep.order <= 2.5


def test_d_volume_is_fd_exact():
    rep = sc.d_volume_check(NEAR, PF.random(3, 1))
    assert rep.rel_err <= 1e-10


def test_richardson_removes_t2_and_t4_terms():
    f = lambda t: 3 * t + 2 * t**3 - 7 * t**5
    D = [(f(t) - f(-t)) / (2 * t) for t in sc.FD_STEPS]
    assert sc.richardson(D) == pytest.approx(3.0, abs=1e-10)
