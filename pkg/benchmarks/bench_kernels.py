"""Compare the compiled and numpy jet kernels.

Times ``pullback_weights`` on a batch of map jets for each form order and a
full ``assemble`` call, with each available backend, and checks that both
backends give the same numbers.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from polyshape import kernels
from polyshape._multiindex import form_functionals, ncoef
from polyshape.discretization import assemble, cached_basis
from polyshape.geometry import DomainMap, PerturbationField
from polyshape.quadrature import disk_rule


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--nodes", type=int, default=4000)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + f"{'max diff':>12}")

    phi = DomainMap.identity().perturbed(PerturbationField.harmonic_gradient(3) * 0.05, 1.0)
    for power in (1, 2, 3, 4, 5, 6):
        ell, K = form_functionals(power)
        g = rng.standard_normal((args.nodes, 2, ncoef(K))) * 0.1
        g[:, :, 1:3] += np.eye(2)
        row, outs = [], []
        for b in backends:
            with kernels.use_backend(b):
                t, out = _best(lambda: kernels.pullback_weights(g, K, ell), args.repeat)
            row.append(t)
            outs.append(out)
        diff = max(float(np.abs(o - outs[0]).max()) for o in outs)
        print(f"{f'pullback_weights K={K} p={power}':<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row)
              + f"{diff:>12.1e}")

    quad = disk_rule()
    for n, m in ((1, 0), (2, 1), (3, 0)):
        basis = cached_basis(n)
        assemble(phi, n, m, basis, quad)  # warm the basis caches
        row, outs = [], []
        for b in backends:
            with kernels.use_backend(b):
                t, out = _best(lambda: assemble(phi, n, m, basis, quad), args.repeat)
            row.append(t)
            outs.append(out.A)
        diff = max(float(np.abs(o - outs[0]).max() / np.abs(outs[0]).max()) for o in outs)
        print(f"{f'assemble P{n}{m} d=16':<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in row)
              + f"{diff:>12.1e}")


if __name__ == "__main__":
    main()
