import numpy as np
import pytest

from polyshape.config import RunConfig, load, parse_field, parse_map, parse_text
from polyshape.errors import ConfigError
from polyshape.geometry import DomainMap, PerturbationField as PF


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert (cfg.n, cfg.m, cfg.d) == (1, 0, 16)


def test_map_specs():
    np.testing.assert_array_equal(parse_map("identity").coeffs, DomainMap.identity().coeffs)
    np.testing.assert_array_equal(parse_map("dilation:2").coeffs, DomainMap.dilation(2).coeffs)
    np.testing.assert_array_equal(parse_map("ellipse:0.3").coeffs, DomainMap.ellipse(0.3).coeffs)
    aff = parse_map("affine:1,0.2,0,1.5,0.1,-0.1")
    np.testing.assert_allclose(aff(np.zeros((1, 2))), [[0.1, -0.1]])
    combo = parse_map("identity+0.05*hre:2+1e-2*radial:1")
    expect = DomainMap.identity().perturbed(PF.harmonic_gradient(2), 0.05).perturbed(PF.radial(1), 0.01)
    np.testing.assert_allclose(combo.coeffs, expect.coeffs, atol=1e-16)


def test_field_specs():
    pts = np.array([[0.3, 0.2]])
    np.testing.assert_allclose(parse_field("dilation")(pts), pts)
    np.testing.assert_allclose(parse_field("translation:1,-2")(pts), [[1, -2]])
    f = parse_field("hre:2+0.5*radial:1")
    np.testing.assert_allclose(f(pts), (PF.harmonic_gradient(2) + PF.radial(1) * 0.5)(pts))
    np.testing.assert_array_equal(parse_field("random:3:7").coeffs, PF.random(3, 7).coeffs)


@pytest.mark.parametrize("spec", ["square", "dilation:x", "affine:1,2,3", "file:/nonexistent/map.txt"])
def test_bad_map_specs(spec):
    with pytest.raises(ConfigError):
        parse_map(spec)


@pytest.mark.parametrize("spec", ["hre:9", "swirl", "translation:1", ""])
def test_bad_field_specs(spec):
    with pytest.raises(ConfigError):
        parse_field(spec)


def test_map_file(tmp_path):
    phi = DomainMap.identity().perturbed(PF.random(3, 1), 0.02)
    path = tmp_path / "phi.txt"
    path.write_text(phi.to_text("phi"))
    np.testing.assert_array_equal(parse_map(f"file:{path}").coeffs, phi.coeffs)


def test_parse_text_and_load(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nn = 2\nm = 1  # trailing\nF = 2-3\nmap = ellipse:0.1\n")
    assert parse_text(path.read_text())["F"] == "2-3"
    cfg = load(path, {"d": 12, "m": None})
    assert (cfg.n, cfg.m, cfg.d, cfg.F) == (2, 1, 12, (2, 3))
    assert load(path, {"F": "2,3"}).F == (2, 3)


@pytest.mark.parametrize("bad", [{"n": 4}, {"n": 1, "m": 1}, {"F": "1,3"}, {"h": 3}, {"cluster_rtol": 0.5},
                                 {"mode": "up"}, {"d": -1}, {"colour": "red"}, {"n": "two"}, {"count": 1, "F": "2"}])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        load(None, bad)


def test_fingerprint_ignores_workers_and_output():
    a = load(None, {"workers": 1, "out": ""})
    b = load(None, {"workers": 8, "out": "x.csv"})
    c = load(None, {"d": 12})
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()
