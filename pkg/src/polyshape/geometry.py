"""Polynomial maps of the unit disk, perturbation fields, boundary sampling.

A :class:`DomainMap` ``phi`` describes the domain ``phi(D)`` of the unit disk
``D``; a :class:`PerturbationField` ``psi`` is a direction in which ``phi`` is
moved (``phi + t psi``). Both are polynomial vector fields of total degree at
most 8, stored per component as graded monomial coefficient vectors.

Text serialization (``to_text``/``from_text``) writes one line per nonzero
coefficient, e.g. ``phi.x.c12 = 0.5`` for the ``x``-component coefficient of
``x * y**2``, with 17 significant digits so the round trip is exact.
"""
from dataclasses import dataclass, field
import hashlib
import re

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import polynomials as poly
from ._multiindex import index, ncoef
from .errors import DegenerateBoundary, NotBiLipschitz
from .quadrature import DEFAULT_M, disk_rule

MAX_DEGREE = 8
DEFAULT_BILIP_DELTA = 1e-6
INJECTIVITY_SAMPLES = 500


@dataclass(frozen=True, eq=False)
class PolyField:
    coeffs: np.ndarray
    provenance: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != 2:
            raise ValueError("coefficients must have shape (2, ncoef(D))")
        c = poly.resize(c, max(1, poly.degree(c)))
        if poly.degree(c) > MAX_DEGREE:
            raise ValueError(f"polynomial degree {poly.degree(c)} exceeds {MAX_DEGREE}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_terms(cls, terms_x, terms_y, provenance="custom"):
        """Build from ``{(a, b): coeff}`` dictionaries per component."""
        D = max([1] + [a + b for a, b in list(terms_x) + list(terms_y)])
        c = np.zeros((2, ncoef(D)))
        for comp, terms in enumerate((terms_x, terms_y)):
            for (a, b), v in terms.items():
                c[comp, index(a, b)] += v
        return cls(c, provenance)

    @property
    def degree(self):
        return poly.degree(self.coeffs)

    def __call__(self, pts):
        return poly.evaluate(self.coeffs, pts)

    def jets(self, pts, K):
        """Exact Taylor coefficients ``(N, 2, ncoef(K))`` at each point."""
        return poly.taylor(self.coeffs, pts, K)

    def jacobian(self, pts):
        """``(N, 2, 2)`` matrices ``[d f_i / d x_j]``."""
        return self.jets(pts, 1)[:, :, 1:3]

    def _combine(self, other, a, b):
        D = max(self.degree, other.degree, 1)
        return poly.resize(self.coeffs, D) * a + poly.resize(other.coeffs, D) * b

    def fingerprint_bytes(self):
        return np.ascontiguousarray(self.coeffs).tobytes()

    def to_text(self, prefix):
        lines = []
        for comp, name in enumerate("xy"):
            D = poly.degree_of_length(self.coeffs.shape[1])
            for (a, b) in poly.multi_indices(D):
                v = self.coeffs[comp, index(a, b)]
                if v != 0.0:
                    lines.append(f"{prefix}.{name}.c{a}{b} = {v:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, prefix, provenance="custom"):
        tx, ty = {}, {}
        pat = re.compile(rf"^\s*{re.escape(prefix)}\.([xy])\.c(\d)(\d)\s*=\s*(\S+)\s*$")
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            if not line.strip():
                continue
            mt = pat.match(line)
            if mt is None:
                continue
            comp, a, b, v = mt.groups()
            (tx if comp == "x" else ty)[(int(a), int(b))] = float(v)
        if not tx and not ty:
            raise ValueError(f"no '{prefix}.*' coefficients found")
        return cls.from_terms(tx, ty, provenance)


class PerturbationField(PolyField):
    """Polynomial vector field ``psi`` moving a domain map."""

    @classmethod
    def dilation(cls):
        return cls.from_terms({(1, 0): 1.0}, {(0, 1): 1.0}, "dilation")

    @classmethod
    def rotation(cls):
        return cls.from_terms({(0, 1): -1.0}, {(1, 0): 1.0}, "rotation")

    @classmethod
    def translation(cls, direction):
        dx, dy = direction
        return cls.from_terms({(0, 0): float(dx)}, {(0, 0): float(dy)}, "translation")

    @classmethod
    def harmonic_gradient(cls, k, part="re"):
        """``grad Re(z^k)`` or ``grad Im(z^k)`` with ``z = x + i y``, ``1 <= k <= 6``.

        With ``f = z^k``: ``grad Re f = (Re f', -Im f')`` and
        ``grad Im f = (Im f', Re f')`` where ``f' = k z^(k-1)``.
        """
        if not 1 <= k <= 6:
            raise ValueError("harmonic-gradient presets need 1 <= k <= 6")
        re_, im_ = _z_power(k - 1)
        re_ = {key: k * v for key, v in re_.items()}
        im_ = {key: k * v for key, v in im_.items()}
        if part == "re":
            return cls.from_terms(re_, {key: -v for key, v in im_.items()}, f"hre{k}")
        if part == "im":
            return cls.from_terms(im_, re_, f"him{k}")
        raise ValueError("part must be 're' or 'im'")

    @classmethod
    def radial(cls, j):
        """``r^(2j) * (x, y)``; ``j = 0`` is the dilation field."""
        r2j = poly.to_dense(_r2_power(j))
        tx = {(a + 1, b): r2j[a, b] for a in range(r2j.shape[0]) for b in range(r2j.shape[1]) if r2j[a, b]}
        ty = {(a, b + 1): r2j[a, b] for a in range(r2j.shape[0]) for b in range(r2j.shape[1]) if r2j[a, b]}
        return cls.from_terms(tx, ty, f"radial{j}")

    @classmethod
    def random(cls, degree, seed, scale=1.0):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal((2, ncoef(degree))) * scale
        return cls(c, f"random(deg={degree},seed={seed})")

    def __add__(self, other):
        return PerturbationField(self._combine(other, 1.0, 1.0), "sum")

    def __mul__(self, s):
        return PerturbationField(self.coeffs * float(s), self.provenance)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class DomainMap(PolyField):
    """Polynomial diffeomorphism ``phi`` of the closed unit disk."""

    @classmethod
    def identity(cls):
        return cls.from_terms({(1, 0): 1.0}, {(0, 1): 1.0}, "identity")

    @classmethod
    def dilation(cls, c):
        return cls.from_terms({(1, 0): float(c)}, {(0, 1): float(c)}, f"dilation({c:g})")

    @classmethod
    def affine(cls, A, b=(0.0, 0.0)):
        A = np.asarray(A, dtype=float)
        tx = {(1, 0): A[0, 0], (0, 1): A[0, 1], (0, 0): float(b[0])}
        ty = {(1, 0): A[1, 0], (0, 1): A[1, 1], (0, 0): float(b[1])}
        return cls.from_terms(tx, ty, "affine")

    @classmethod
    def rotation(cls, theta):
        c, s = np.cos(theta), np.sin(theta)
        m = cls.affine([[c, -s], [s, c]])
        return cls(m.coeffs, f"rotation({theta:g})")

    @classmethod
    def ellipse(cls, t):
        """Area-preserving ``((1+t) x, y/(1+t))``."""
        return cls.from_terms({(1, 0): 1.0 + t}, {(0, 1): 1.0 / (1.0 + t)}, f"ellipse({t:g})")

    def perturbed(self, psi, t):
        """``phi + t * psi``."""
        return DomainMap(self._combine(psi, 1.0, float(t)), "custom")

    def scaled(self, c):
        """Uniform dilation of the image, ``c * phi``."""
        return DomainMap(self.coeffs * float(c), self.provenance if c == 1 else "custom")

    def composed_with_linear(self, R):
        """``R o phi`` for a 2x2 matrix ``R``."""
        R = np.asarray(R, dtype=float)
        return DomainMap(R @ self.coeffs, "custom")

    def __add__(self, other):
        return DomainMap(self._combine(other, 1.0, 1.0), "custom")

    def fingerprint(self):
        return hashlib.blake2b(self.fingerprint_bytes(), digest_size=8).hexdigest()

    @property
    def is_identity(self):
        return self.coeffs.shape == (2, 3) and np.array_equal(self.coeffs, [[0, 1, 0], [0, 0, 1]])


def _z_power(k):
    """Real and imaginary parts of ``(x + i y)^k`` as term dictionaries."""
    from math import comb

    re_, im_ = {}, {}
    for j in range(k + 1):
        c = comb(k, j)
        # i^j cycles 1, i, -1, -i
        r = j % 4
        if r == 0:
            re_[(k - j, j)] = re_.get((k - j, j), 0.0) + c
        elif r == 1:
            im_[(k - j, j)] = im_.get((k - j, j), 0.0) + c
        elif r == 2:
            re_[(k - j, j)] = re_.get((k - j, j), 0.0) - c
        else:
            im_[(k - j, j)] = im_.get((k - j, j), 0.0) - c
    return re_, im_


def _r2_power(j):
    r2 = poly.from_dense(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), 2)
    out = np.zeros(1)
    out[0] = 1.0
    for _ in range(j):
        out = poly.multiply(out, r2)
    return out


def eval_map_jet(phi, x, K):
    """Exact order-``K`` :class:`~polyshape.jets.MapJet` of ``phi`` at the point ``x``."""
    from .jets import MapJet
    x = np.asarray(x, dtype=float).reshape(2)
    return MapJet.from_array(x, K, phi.jets(x[None, :], K)[0])


@dataclass(frozen=True)
class BiLipschitzReport:
    min_det: float
    injective: bool
    delta: float

    @property
    def passed(self):
        return bool(self.min_det > self.delta and self.injective)


def _injectivity_points():
    rng = np.random.default_rng(20240917)
    n_in = INJECTIVITY_SAMPLES * 4 // 5
    r = np.sqrt(rng.uniform(0.0, 1.0, n_in))
    t = rng.uniform(0.0, 2 * np.pi, n_in)
    tb = 2 * np.pi * np.arange(INJECTIVITY_SAMPLES - n_in) / (INJECTIVITY_SAMPLES - n_in)
    return np.vstack([np.column_stack([r * np.cos(t), r * np.sin(t)]),
                      np.column_stack([np.cos(tb), np.sin(tb)])])


def bilipschitz_check(phi, quad=None, delta=DEFAULT_BILIP_DELTA):
    """Minimum Jacobian determinant over ``quad`` nodes plus a sampled injectivity test.

    Injectivity is heuristic: it fails if two sampled reference points at least
    1e-3 apart land within 1e-9 of each other.
    """
    key = ("bilip", id(quad), delta)
    if key in phi._cache:
        return phi._cache[key]
    quad = quad or disk_rule()
    pts = np.vstack([quad.nodes, quad.boundary_points])
    J = phi.jacobian(pts)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    ref = _injectivity_points()
    img = phi(ref)
    dref = squareform(pdist(ref))
    dimg = squareform(pdist(img))
    collide = (dimg < 1e-9) & (dref > 1e-3)
    report = BiLipschitzReport(float(det.min()), not bool(collide.any()), delta)
    phi._cache[key] = report
    return report


def require_bilipschitz(phi, quad=None, delta=DEFAULT_BILIP_DELTA):
    rep = bilipschitz_check(phi, quad, delta)
    if not rep.passed:
        raise NotBiLipschitz(
            f"map rejected: min det = {rep.min_det:.3e} (delta {delta:g}), injective = {rep.injective}",
            rep)
    return rep


@dataclass(frozen=True, eq=False)
class BoundarySamples:
    """Vectorized boundary samples of ``phi(D)``.

    ``x``: reference points on the unit circle; ``y = phi(x)``; ``normal``: unit
    outward normals at ``y``; ``weights``: arc-length quadrature weights;
    ``zeta``: ``psi(x)`` (the field pushed to ``y``) or ``None``.
    """

    x: np.ndarray
    y: np.ndarray
    normal: np.ndarray
    weights: np.ndarray
    zeta: np.ndarray = None

    def __len__(self):
        return self.weights.size

    @property
    def perimeter(self):
        return float(self.weights.sum())

    def normal_flux(self):
        """``zeta . nu`` at each sample."""
        return np.einsum("ij,ij->i", self.zeta, self.normal)


def boundary_sample(phi, M=DEFAULT_M, psi=None, check=True):
    """Sample ``phi(dD)`` at ``theta_i = 2 pi i / M``.

    Normals are the tangent rotated by ``-pi/2``; this is outward because
    ``det grad phi > 0`` is enforced (orientation preserving maps only).
    """
    if M < 16:
        raise ValueError("need M >= 16 boundary samples")
    if check:
        require_bilipschitz(phi)
    key = ("bsample", M)
    if key not in phi._cache:
        theta = 2.0 * np.pi * np.arange(M) / M
        x = np.column_stack([np.cos(theta), np.sin(theta)])
        jet = phi.jets(x, 1)
        y = jet[:, :, 0]
        J = jet[:, :, 1:3]
        tangent = np.einsum("nij,nj->ni", J, np.column_stack([-np.sin(theta), np.cos(theta)]))
        tn = np.linalg.norm(tangent, axis=1)
        if np.any(tn <= 1e-14):
            raise DegenerateBoundary("zero tangent on the image boundary")
        normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / tn[:, None]
        w = (2.0 * np.pi / M) * tn
        phi._cache[key] = (x, y, normal, w)
    x, y, normal, w = phi._cache[key]
    zeta = psi(x) if psi is not None else None
    return BoundarySamples(x, y, normal, w, zeta)


def volume(phi, quad=None):
    """Area of ``phi(D)``: disk quadrature of ``|det grad phi|``."""
    quad = quad or disk_rule()
    require_bilipschitz(phi)
    J = phi.jacobian(quad.nodes)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return float(np.dot(quad.weights, np.abs(det)))


def volume_derivative(phi, psi, M=DEFAULT_M):
    """Derivative of the area along ``psi``: boundary flux of ``zeta = psi o phi^{-1}``."""
    bs = boundary_sample(phi, M, psi)
    return float(np.dot(bs.weights, bs.normal_flux()))
