import numpy as np
import pytest
from scipy.integrate import quad as integrate

from polyshape.errors import DegenerateBoundary, NotBiLipschitz
from polyshape.geometry import (
    DomainMap,
    PerturbationField,
    bilipschitz_check,
    boundary_sample,
    eval_map_jet,
    require_bilipschitz,
    volume,
    volume_derivative,
)
from polyshape.quadrature import disk_rule

GENERIC_PSI = PerturbationField.harmonic_gradient(2) + PerturbationField.radial(1) * 0.5 \
    + PerturbationField.harmonic_gradient(3, "im") * 0.3
GENERIC_PHI = DomainMap.identity().perturbed(PerturbationField.harmonic_gradient(3) * 0.05
                                             + PerturbationField.radial(1) * 0.03, 1.0)


def test_identity_jet():
    j = eval_map_jet(DomainMap.identity(), [0.3, -0.2], 3)
    np.testing.assert_array_equal(j.linear_part, np.eye(2))
    np.testing.assert_array_equal(j.value, [0.3, -0.2])
    assert np.all(j.as_array()[:, 3:] == 0)


def test_dilation_jet():
    j = eval_map_jet(DomainMap.dilation(2.5), [0.3, -0.2], 2)
    np.testing.assert_allclose(j.value, [0.75, -0.5])
    np.testing.assert_allclose(j.linear_part, 2.5 * np.eye(2))


def test_bilipschitz_examples():
    assert bilipschitz_check(DomainMap.identity()).min_det == pytest.approx(1.0)
    assert bilipschitz_check(DomainMap.identity()).passed
    assert not bilipschitz_check(DomainMap.dilation(0.0)).passed
    rep = bilipschitz_check(DomainMap.ellipse(0.3))
    assert rep.passed and rep.min_det == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(NotBiLipschitz):
        require_bilipschitz(DomainMap.dilation(0.0))


def test_folded_map_rejected():
    folded = DomainMap.from_terms({(2, 0): 1.0}, {(0, 1): 1.0})
    assert not bilipschitz_check(folded).passed


def test_identity_boundary():
    bs = boundary_sample(DomainMap.identity(), 64)
    np.testing.assert_allclose(bs.normal, bs.x, atol=1e-15)
    assert bs.perimeter == pytest.approx(2 * np.pi, abs=1e-12)


def test_dilation_perimeter():
    assert boundary_sample(DomainMap.dilation(1.7), 64).perimeter == pytest.approx(2 * np.pi * 1.7, abs=1e-12)


@pytest.mark.parametrize("t", [0.1, 0.3, -0.2])
def test_ellipse_perimeter(t):
    a, b = 1 + t, 1 / (1 + t)
    exact = integrate(lambda s: np.hypot(a * np.sin(s), b * np.cos(s)), 0, 2 * np.pi,
                      epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    assert boundary_sample(DomainMap.ellipse(t), 96).perimeter == pytest.approx(exact, abs=1e-10)


def test_normals_are_outward_unit():
    bs = boundary_sample(GENERIC_PHI, 96)
    np.testing.assert_allclose(np.linalg.norm(bs.normal, axis=1), 1.0, atol=1e-14)
    # outward: flux of the position field is positive (star-shaped image)
    assert np.all(np.einsum("ij,ij->i", bs.y, bs.normal) > 0)


def test_degenerate_boundary():
    with pytest.raises(DegenerateBoundary):
        boundary_sample(DomainMap.dilation(0.0), 64, check=False)


def test_volumes():
    assert volume(DomainMap.identity()) == pytest.approx(np.pi, abs=1e-12)
    assert volume(DomainMap.dilation(1.5)) == pytest.approx(2.25 * np.pi, abs=1e-12)
    assert volume(DomainMap.ellipse(0.3)) == pytest.approx(np.pi, abs=1e-10)


def test_volume_derivative_examples():
    assert volume_derivative(DomainMap.identity(), PerturbationField.dilation()) == pytest.approx(2 * np.pi, abs=1e-12)
    assert volume_derivative(DomainMap.identity(), PerturbationField.rotation()) == pytest.approx(0, abs=1e-13)


@pytest.mark.parametrize("k", range(1, 7))
@pytest.mark.parametrize("part", ["re", "im"])
def test_harmonic_fields_preserve_volume(k, part):
    psi = PerturbationField.harmonic_gradient(k, part)
    assert abs(volume_derivative(DomainMap.identity(), psi)) <= 1e-10


def test_volume_derivative_against_finite_differences():
    def V(t):
        return volume(GENERIC_PHI.perturbed(GENERIC_PSI, t))

    fd = [(V(t) - V(-t)) / (2 * t) for t in (1e-3, 5e-4)]
    dv = volume_derivative(GENERIC_PHI, GENERIC_PSI)
    assert abs(fd[-1] - dv) <= 1e-6 * abs(dv)


@pytest.mark.parametrize("theta", [0.3, 1.9, -2.4])
def test_rotation_invariance(theta):
    R = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    rot = GENERIC_PHI.composed_with_linear(R)
    assert volume(rot) == pytest.approx(volume(GENERIC_PHI), abs=1e-12)
    np.testing.assert_allclose(boundary_sample(rot, 96).weights, boundary_sample(GENERIC_PHI, 96).weights,
                               atol=1e-12)


def test_text_round_trip_is_exact():
    psi = PerturbationField.random(4, 3)
    phi = GENERIC_PHI.perturbed(psi, 0.0123456789)
    back = DomainMap.from_text(phi.to_text("phi"), "phi")
    np.testing.assert_array_equal(back.coeffs, phi.coeffs)
    assert back.fingerprint() == phi.fingerprint()


def test_field_presets():
    pts = np.array([[0.3, -0.4], [0.1, 0.7]])
    np.testing.assert_allclose(PerturbationField.dilation()(pts), pts)
    np.testing.assert_allclose(PerturbationField.rotation()(pts), pts[:, ::-1] * [-1, 1])
    # grad Re z^2 = (2x, -2y); grad Im z^2 = (2y, 2x)
    np.testing.assert_allclose(PerturbationField.harmonic_gradient(2)(pts), 2 * pts * [1, -1])
    np.testing.assert_allclose(PerturbationField.harmonic_gradient(2, "im")(pts), 2 * pts[:, ::-1])
    with pytest.raises(ValueError):
        PerturbationField.harmonic_gradient(7)


def test_quadrature_integrates_polynomials():
    q = disk_rule(20, 48)
    x, y = q.nodes.T
    assert q.weights.sum() == pytest.approx(np.pi, abs=1e-13)
    assert np.dot(q.weights, x**2 * y**2) == pytest.approx(np.pi / 24, abs=1e-14)
    assert np.dot(q.weights, x**4) == pytest.approx(np.pi / 8, abs=1e-14)
