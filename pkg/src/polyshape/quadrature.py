"""Tensor quadrature on the closed unit disk and its boundary circle."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_G = 40
DEFAULT_M = 96


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre in radius (with the polar weight ``r``) times uniform angles.

    Exact for ``r^k e^{i j theta}`` with ``k + 1 <= 2G - 1`` and ``|j| < M``.
    The boundary rule is the ``M``-point trapezoid rule on the unit circle.
    """

    G: int
    M: int
    nodes: np.ndarray
    weights: np.ndarray
    boundary_theta: np.ndarray
    boundary_weights: np.ndarray

    @property
    def size(self):
        return self.weights.size

    @property
    def boundary_points(self):
        t = self.boundary_theta
        return np.column_stack([np.cos(t), np.sin(t)])


@lru_cache(maxsize=16)
def disk_rule(G=DEFAULT_G, M=DEFAULT_M):
    if G < 1 or M < 3:
        raise ValueError("need G >= 1 and M >= 3")
    xg, wg = np.polynomial.legendre.leggauss(G)
    r = 0.5 * (xg + 1.0)
    wr = 0.5 * wg * r
    theta = 2.0 * np.pi * np.arange(M) / M
    wt = np.full(M, 2.0 * np.pi / M)
    R, T = np.meshgrid(r, theta, indexing="ij")
    nodes = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    weights = np.outer(wr, wt).ravel()
    for a in (nodes, weights, theta, wt):
        a.setflags(write=False)
    return QuadratureRule(G, M, nodes, weights, theta, wt)
