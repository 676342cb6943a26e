"""Eigenvalue clusters and symmetric functions of clustered eigenvalues.

Cluster labels are 1-based, matching ``lambda_1 <= lambda_2 <= ...``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ClusterGapError

DEFAULT_RTOL = 1e-6
GAP_FACTOR = 10.0


@dataclass(frozen=True)
class Cluster:
    """Contiguous eigenvalue labels ``indices`` with summary statistics.

    ``spread`` is ``(max - min) / mean`` over the cluster; ``gap`` is the
    distance to the nearest eigenvalue outside the cluster, relative to ``mean``.
    """

    indices: tuple
    values: tuple
    mean: float
    spread: float
    gap: float
    rtol: float = DEFAULT_RTOL

    @property
    def size(self):
        return len(self.indices)

    @property
    def separated(self):
        return self.gap >= GAP_FACTOR * self.spread and self.gap > self.rtol

    def require_separated(self):
        if not self.separated:
            raise ClusterGapError(
                f"cluster {list(self.indices)}: gap {self.gap:.3e} < {GAP_FACTOR:g} x spread "
                f"{self.spread:.3e} (or below rtol {self.rtol:g})")

    def as_dict(self):
        return {"indices": list(self.indices), "mean": self.mean, "spread": self.spread,
                "gap": self.gap, "rtol": self.rtol}


def _all_values(result):
    vals = getattr(result, "eigenvalues", result)
    return np.asarray(vals, dtype=float)


def make_cluster(result, F, rtol=DEFAULT_RTOL):
    """Cluster for the 1-based labels ``F`` (must be contiguous)."""
    lam = _all_values(result)
    F = tuple(sorted(int(j) for j in F))
    if not F or F[0] < 1 or F[-1] > lam.size:
        raise ValueError(f"cluster labels {list(F)} out of range 1..{lam.size}")
    if F != tuple(range(F[0], F[-1] + 1)):
        raise ValueError(f"cluster labels {list(F)} are not contiguous")
    vals = lam[F[0] - 1:F[-1]]
    mean = float(vals.mean())
    spread = float((vals.max() - vals.min()) / mean)
    nb = []
    if F[0] > 1:
        nb.append(vals.min() - lam[F[0] - 2])
    if F[-1] < lam.size:
        nb.append(lam[F[-1]] - vals.max())
    gap = float(min(nb) / mean) if nb else float("inf")
    return Cluster(F, tuple(float(v) for v in vals), mean, spread, gap, rtol)


def cluster_eigenvalues(result, rtol=DEFAULT_RTOL, count=None):
    """Greedy grouping of consecutive eigenvalues whose relative step is ``<= rtol``.

    Only the first ``count`` eigenvalues (default: ``result.count`` if present)
    are grouped; a cluster touching the cutoff is extended past it so that it
    is never split.
    """
    if not 0.0 < rtol < 0.1:
        raise ValueError("rtol must lie in (0, 0.1)")
    lam = _all_values(result)
    if count is None:
        count = getattr(result, "count", lam.size)
    out = []
    j = 0
    while j < count:
        k = j
        while k + 1 < lam.size and lam[k + 1] - lam[k] <= rtol * abs(lam[k]):
            k += 1
        out.append(make_cluster(lam, range(j + 1, k + 2), rtol))
        j = k + 1
    return out


def cluster_ids(clusters, count):
    """Per-label cluster ordinal (1-based) for the first ``count`` labels."""
    ids = np.zeros(count, dtype=int)
    for c, cl in enumerate(clusters, start=1):
        for j in cl.indices:
            if j <= count:
                ids[j - 1] = c
    return ids


def _esym_all(values):
    """All elementary symmetric polynomials ``e_0..e_k`` by the expanding product."""
    e = np.zeros(len(values) + 1)
    e[0] = 1.0
    for i, v in enumerate(values, start=1):
        e[1:i + 1] = e[1:i + 1] + v * e[0:i]
    return e


def elementary_symmetric(F_values, h):
    """``Lambda_{F,h}``: sum of all ``h``-fold products of distinct entries of ``F_values``."""
    vals = [float(v) for v in F_values]
    if not 1 <= h <= len(vals):
        raise ValueError(f"h={h} outside 1..{len(vals)}")
    # sorting makes the result independent of the input order
    return float(_esym_all(sorted(vals))[h])


def gamma_symmetric(F_values, h):
    """``Gamma_{F,h}``: elementary symmetric function of the reciprocals ``mu = 1/lambda``."""
    vals = np.asarray(F_values, dtype=float)
    if np.any(vals <= 0.0):
        raise ValueError("all values must be positive")
    if not 0 <= h <= vals.size:
        raise ValueError(f"h={h} outside 0..{vals.size}")
    return float(_esym_all(sorted(1.0 / vals))[h])


def duality_check(F_values):
    """``max_h |Lambda_{F,h} - Gamma_{F,|F|-h} / Gamma_{F,|F|}| / Lambda_{F,h}``."""
    vals = np.asarray(F_values, dtype=float)
    if np.any(vals <= 0.0):
        raise ValueError("all values must be positive")
    k = vals.size
    g_all = gamma_symmetric(vals, k)
    res = 0.0
    for h in range(1, k + 1):
        lam = elementary_symmetric(vals, h)
        res = max(res, abs(lam - gamma_symmetric(vals, k - h) / g_all) / lam)
    return res
