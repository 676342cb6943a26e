import numpy as np
import pytest

from polyshape.geometry import DomainMap, PerturbationField as PF, bilipschitz_check, volume
from polyshape.optimize import OptimConfig, OptimState, default_dictionary, gradient, minimize

FAST = dict(d=10, G=24, M=64)


def _state(phi, F=(1,)):
    return OptimState(phi, 0.0, 0.0, volume(phi), F)


def test_dictionary():
    fields = default_dictionary(3)
    assert len(fields) == 7
    assert fields[0].provenance == "dilation"


def test_disk_stops_immediately():
    st = minimize(DomainMap.identity(), OptimConfig(**FAST))
    assert st.converged and st.iteration == 0 and st.flag == ""
    assert st.proj_grad_norm <= 1e-6 * st.objective


def test_rotation_component_vanishes():
    cfg = OptimConfig(**FAST)
    fields = [PF.rotation(), PF.dilation(), PF.harmonic_gradient(2)]
    g, nvec, pg = gradient(_state(DomainMap.ellipse(0.15)), cfg, fields)
    assert abs(g[0]) <= 1e-9 * 6.0
    assert abs(nvec[0]) <= 1e-12


def test_dilation_component_at_disk():
    cfg = OptimConfig(n=2, m=1, **FAST)
    g, nvec, pg = gradient(_state(DomainMap.identity()), cfg, [PF.dilation(), PF.harmonic_gradient(2)])
    lam = 14.681970642123831
    assert g[0] == pytest.approx(-2 * lam, rel=1e-5)
    assert nvec[0] == pytest.approx(2 * np.pi, rel=1e-12)
    assert np.linalg.norm(pg) <= 1e-6 * lam


def test_ellipse_run_reaches_disk_value():
    seen = []
    st = minimize(DomainMap.ellipse(0.15), OptimConfig(target_volume=np.pi, **FAST),
                  callback=lambda s: seen.append(s.objective))
    assert st.converged, st.flag
    assert st.objective == pytest.approx(5.783186, rel=1e-2)
    assert st.criticality <= 1e-3
    assert st.volume == pytest.approx(np.pi, rel=1e-8)
    objs = [r.objective for r in st.log]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(objs, objs[1:]))
    assert seen == objs[1:]
    assert all(r.volume == pytest.approx(np.pi, rel=1e-8) for r in st.log)
    assert all(bilipschitz_check(DomainMap(r.coeffs.reshape(2, -1))).passed for r in st.log)


def test_trajectory_csv(tmp_path):
    st = minimize(DomainMap.ellipse(0.1), OptimConfig(max_iters=2, **FAST))
    path = tmp_path / "traj.csv"
    st.write_csv(path, "abc", "0.1.0")
    lines = path.read_text().splitlines()
    assert lines[0] == "# fingerprint=abc version=0.1.0"
    assert len(lines) == 2 + len(st.log)


def test_iteration_limit_flag():
    st = minimize(DomainMap.ellipse(0.2), OptimConfig(max_iters=1, **FAST))
    assert st.flag == "max_iters" and not st.converged and st.iteration == 1


def test_max_mode_runs():
    st = minimize(DomainMap.ellipse(0.1), OptimConfig(mode="max", max_iters=2, **FAST))
    assert isinstance(st, OptimState)
    assert np.isfinite(st.objective)


def test_bad_mode():
    with pytest.raises(ValueError):
        minimize(DomainMap.identity(), OptimConfig(mode="sideways", **FAST))
