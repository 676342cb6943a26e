"""Backend selection for the batched jet kernels.

The compiled extension ``polyshape._jetcore`` is used when it imports; otherwise
the numpy implementation in ``polyshape._jetcore_py`` takes over. Setting the
environment variable ``POLYSHAPE_BACKEND=python`` forces the fallback at import
time, and :func:`use_backend` switches temporarily (tests and benchmarks).
"""
import contextlib
import os

from . import _jetcore_py

try:
    from . import _jetcore as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _jetcore_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = _BACKENDS["cython" if _compiled is not None else "python"]
if os.environ.get("POLYSHAPE_BACKEND", "").lower() == "python":
    _active = _jetcore_py


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _active is _compiled and _compiled is not None else "python"


def set_backend(name):
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}") from None


@contextlib.contextmanager
def use_backend(name):
    prev = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def jet_mul(a, b, K):
    return _active.jet_mul(a, b, K)


def map_powers(delta, K):
    return _active.map_powers(delta, K)


def map_invert(g, K):
    return _active.map_invert(g, K)


def pullback_weights(g, K, ell):
    return _active.pullback_weights(g, K, ell)
