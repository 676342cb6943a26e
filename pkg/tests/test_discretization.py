import numpy as np
import pytest

from polyshape import oracles
from polyshape.discretization import (
    PolySet,
    assemble,
    build_basis,
    cached_basis,
    eigensolve,
    solve,
    workers,
)
from polyshape.errors import NotBiLipschitz, NotCoercive
from polyshape.geometry import DomainMap, PerturbationField
from polyshape.quadrature import disk_rule

PAIRS = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]
GENERIC_PHI = DomainMap.identity().perturbed(PerturbationField.harmonic_gradient(3) * 0.05
                                             + PerturbationField.radial(1) * 0.03
                                             + PerturbationField.harmonic_gradient(2, "im") * 0.04, 1.0)


def test_basis_sizes():
    b = build_basis(1, 0)
    assert len(b) == 1
    x = np.array([[0.3, 0.4]])
    assert b.evaluate(x)[0, 0] == pytest.approx(1 - 0.25, abs=1e-15)
    assert len(build_basis(2, 1)) == 3
    assert len(build_basis(1, 10)) == 66
    with pytest.raises(ValueError):
        build_basis(4, 2)
    with pytest.raises(ValueError):
        build_basis(0, 2)


def test_basis_vanishes_on_boundary():
    b = build_basis(2, 6)
    th = np.linspace(0, 2 * np.pi, 13)
    circ = np.column_stack([np.cos(th), np.sin(th)])
    assert np.abs(b.evaluate(circ)).max() < 1e-12
    t = b.taylor(circ, 1)
    assert np.abs(t).max() < 1e-12  # value and gradient vanish for n = 2


def test_legendre_and_monomial_span_agree():
    res = [solve(DomainMap.identity(), 1, 0, d=6, count=5).values]
    mono = build_basis(1, 6, "monomial")
    res.append(eigensolve(assemble(DomainMap.identity(), 1, 0, mono), 5).values)
    np.testing.assert_allclose(res[0], res[1], rtol=1e-10)


def test_raw_single_function_forms():
    u = PolySet(build_basis(1, 0).coeffs)
    f = assemble(DomainMap.identity(), 1, 0, u, orthonormalize=False)
    assert f.A[0, 0] == pytest.approx(2 * np.pi, abs=1e-12)
    assert f.B[0, 0] == pytest.approx(np.pi / 3, abs=1e-12)
    assert eigensolve(f).values[0] == pytest.approx(6.0, abs=1e-12)


@pytest.mark.parametrize("n,m", PAIRS)
def test_forms_symmetric(n, m):
    f = assemble(GENERIC_PHI, n, m, cached_basis(n, 8))
    assert np.abs(f.A - f.A.T).max() <= 1e-10 * np.abs(f.A).max()
    assert np.abs(f.B - f.B.T).max() <= 1e-10 * np.abs(f.B).max()


def test_quadrature_refinement_is_stable():
    basis = cached_basis(2, 8)
    a = assemble(GENERIC_PHI, 2, 1, basis, disk_rule(30, 64))
    b = assemble(GENERIC_PHI, 2, 1, basis, disk_rule(60, 128))
    for X, Y in ((a.A, b.A), (a.B, b.B)):
        assert np.abs(X - Y).max() <= 1e-10 * np.abs(Y).max()


@pytest.mark.parametrize("n,m", [(1, 0), (2, 0), (2, 1)])
def test_disk_eigenvalues_match_bessel_oracle(n, m):
    res = solve(DomainMap.identity(), n, m, d=20, count=6)
    ref = [v for v, _ in oracles.disk_eigenvalues(n, m, 6)]
    np.testing.assert_allclose(res.values, ref, rtol=1e-5)


def test_documented_first_eigenvalues():
    assert solve(DomainMap.identity(), 1, 0, d=20, count=1).values[0] == pytest.approx(5.783186, rel=1e-5)
    assert solve(DomainMap.identity(), 2, 0, d=20, count=1).values[0] == pytest.approx(104.363, rel=1e-5)
    assert solve(DomainMap.identity(), 2, 1, d=20, count=1).values[0] == pytest.approx(14.68197, rel=1e-5)


def test_galerkin_monotone_in_degree():
    prev = None
    for d in (4, 8, 12, 16):
        vals = solve(GENERIC_PHI, 1, 0, d=d, count=6).values
        if prev is not None:
            assert np.all(vals <= prev * (1 + 1e-12))
        prev = vals


@pytest.mark.parametrize("n,m", PAIRS)
def test_dilation_scaling(n, m):
    base = solve(GENERIC_PHI, n, m, d=10, count=5).values
    c = 1.3
    scaled = solve(GENERIC_PHI.scaled(c), n, m, d=10, count=5).values
    np.testing.assert_allclose(scaled, c ** (-2 * (n - m)) * base, rtol=1e-8)


@pytest.mark.parametrize("n,m", [(1, 0), (2, 1), (3, 0)])
def test_rotation_invariance(n, m):
    th = 0.7
    R = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
    a = solve(GENERIC_PHI, n, m, d=10, count=6).values
    b = solve(GENERIC_PHI.composed_with_linear(R), n, m, d=10, count=6).values
    np.testing.assert_allclose(b, a, rtol=1e-9)


@pytest.mark.parametrize("n,m", PAIRS)
def test_rayleigh_and_gram(n, m):
    res = solve(GENERIC_PHI, n, m, d=10, count=8)
    A, B = res.forms.A, res.forms.B
    for j in range(8):
        v = res.eigenvectors[:, j]
        assert (v @ A @ v) / (v @ B @ v) == pytest.approx(res.eigenvalues[j], rel=1e-10)
    assert res.gram_error() <= 1e-10


def test_count_errors():
    f = assemble(DomainMap.identity(), 1, 0, cached_basis(1, 2))
    with pytest.raises(ValueError):
        eigensolve(f, 7)
    with pytest.raises(ValueError):
        eigensolve(f, 0)
    with pytest.raises(ValueError):
        assemble(DomainMap.identity(), 1, 1)


def test_indefinite_energy_is_not_coercive():
    f = assemble(DomainMap.identity(), 1, 0, cached_basis(1, 2))
    bad = type(f)(-f.A, f.B, f.n, f.m, f.basis, f.quad, f.phi, f.transform, f.fingerprint)
    with pytest.raises(NotCoercive):
        eigensolve(bad)


def test_degenerate_map_rejected():
    with pytest.raises(NotBiLipschitz):
        assemble(DomainMap.dilation(0.0), 1, 0, cached_basis(1, 2))


def test_first_order_form_matches_matrix_formula():
    # A_ij = int grad u_i^T S S^T grad u_j |det grad phi| with S = (grad phi)^{-1}
    basis = PolySet(build_basis(1, 4).coeffs)
    quad = disk_rule(30, 64)
    f = assemble(GENERIC_PHI, 1, 0, basis, quad, orthonormalize=False)
    g = basis.taylor(quad.nodes, 1)[:, 1:3, :]  # (N, 2, nb) gradients
    J = GENERIC_PHI.jacobian(quad.nodes)
    S = np.linalg.inv(J)
    SSt = S @ np.swapaxes(S, 1, 2)
    det = np.abs(np.linalg.det(J))
    A = np.einsum("n,nai,nab,nbj->ij", quad.weights * det, g, SSt, g)
    np.testing.assert_allclose(f.A, A, rtol=1e-11, atol=1e-11 * np.abs(A).max())


def test_third_order_form_matches_finite_differences():
    # (grad Delta v)(y) for v = u o phi^{-1}, checked at a node by differencing Delta_phi u
    from polyshape.shape_calculus import pullback_laplacian
    from polyshape.discretization import form_values

    basis = PolySet(build_basis(3, 2).coeffs)
    x0 = np.array([[0.21, -0.13]])
    got = form_values(GENERIC_PHI, 3, basis.taylor(x0, 3), x0)[0]  # (2, nb)
    y0 = GENERIC_PHI(x0)[0]

    def inv(y):
        x = x0[0].copy()
        for _ in range(60):
            x = x - np.linalg.solve(GENERIC_PHI.jacobian(x[None])[0], GENERIC_PHI(x[None])[0] - y)
        return x

    h = 1e-4
    for k, e in enumerate(np.eye(2)):
        xp, xm = inv(y0 + h * e)[None], inv(y0 - h * e)[None]
        fd = [(pullback_laplacian(GENERIC_PHI, u, xp)[0] - pullback_laplacian(GENERIC_PHI, u, xm)[0]) / (2 * h)
              for u in basis.coeffs]
        np.testing.assert_allclose(got[k], fd, rtol=1e-6, atol=1e-6)


def test_assembly_independent_of_worker_count():
    basis = cached_basis(2, 10)
    quad = disk_rule(40, 96)
    ref = assemble(GENERIC_PHI, 2, 1, basis, quad)
    for k in (2, 5):
        with workers(k):
            got = assemble(GENERIC_PHI, 2, 1, basis, quad)
        assert got.A.tobytes() == ref.A.tobytes()
        assert got.B.tobytes() == ref.B.tobytes()


def test_csv_export(tmp_path):
    f = assemble(GENERIC_PHI, 1, 0, cached_basis(1, 3))
    f.to_csv(tmp_path / "A.csv", tmp_path / "B.csv")
    A = np.loadtxt(tmp_path / "A.csv", delimiter=",")
    assert A.tobytes() == f.A.tobytes()
    assert f.fingerprint in (tmp_path / "B.csv").read_text().splitlines()[0]
