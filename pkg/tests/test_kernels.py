import os
import subprocess
import sys

import numpy as np
import pytest

from polyshape import kernels
from polyshape._multiindex import form_functionals, ncoef

BACKENDS = kernels.available_backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _map_batch(rng, N, K):
    g = rng.standard_normal((N, 2, ncoef(K))) * 0.2
    g[:, :, 0] = rng.standard_normal((N, 2))
    g[:, :, 1:3] += np.eye(2)
    return g


@needs_compiled
@pytest.mark.parametrize("K", [1, 2, 4, 6])
def test_backends_agree(rng, K):
    g = _map_batch(rng, 17, K)
    a = rng.standard_normal((17, ncoef(K)))
    b = rng.standard_normal((17, ncoef(K)))
    ell = form_functionals(min(K, 3), K)[0]
    delta = g.copy()
    delta[:, :, 0] = 0.0
    out = {}
    for name in ("python", "cython"):
        with kernels.use_backend(name):
            out[name] = (kernels.jet_mul(a, b, K),
                         kernels.map_powers(delta, K),
                         kernels.map_invert(g, K),
                         kernels.pullback_weights(g, K, ell))
    for x, y in zip(out["python"], out["cython"]):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)


def test_use_backend_restores():
    before = kernels.backend_name()
    with kernels.use_backend("python"):
        assert kernels.backend_name() == "python"
    assert kernels.backend_name() == before


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_environment_forces_fallback():
    env = dict(os.environ, POLYSHAPE_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from polyshape import kernels; print(kernels.backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", BACKENDS)
def test_singular_batch_raises(name):
    g = np.zeros((1, 2, ncoef(2)))
    with kernels.use_backend(name), pytest.raises(ZeroDivisionError):
        kernels.map_invert(g, 2)
