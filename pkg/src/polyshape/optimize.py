"""Area-constrained projected-gradient descent of ``Lambda_{F,h}`` over polynomial maps.

Iterates ``phi_{k+1} = s (phi_k + sum_j p_j psi_j)`` where ``p`` is a step
along the negative projected gradient in the coefficient space of a field
dictionary, and the uniform dilation ``s`` restores the target area exactly.
"""
from dataclasses import dataclass, field
import csv

import numpy as np

from .discretization import assemble, cached_basis, eigensolve
from .errors import ClusterGapError, NotBiLipschitz, NotCoercive, SingularJacobian
from .geometry import DomainMap, PerturbationField, bilipschitz_check, volume
from .quadrature import disk_rule
from .shape_calculus import criticality_residual, hadamard_gradient
from .spectrum import cluster_eigenvalues, elementary_symmetric, make_cluster

ARMIJO_C = 1e-4
DESCENT_TOL = 1e-12


def default_dictionary(max_k=4):
    """Harmonic-gradient fields ``grad Re z^k``, ``grad Im z^k`` for ``k <= max_k`` plus dilation."""
    fields = [PerturbationField.dilation()]
    for k in range(1, max_k + 1):
        fields.append(PerturbationField.harmonic_gradient(k, "re"))
        fields.append(PerturbationField.harmonic_gradient(k, "im"))
    return fields


@dataclass
class OptimConfig:
    n: int = 1
    m: int = 0
    F: tuple = (1,)
    h: int = 1
    d: int = 16
    G: int = 40
    M: int = 96
    gtol: float = 1e-6
    max_iters: int = 200
    dictionary_degree: int = 4
    target_volume: float = None
    mode: str = "min"
    vol_tol: float = 1e-8
    cluster_rtol: float = 1e-6
    initial_step: float = 0.05
    max_backtracks: int = 30


@dataclass
class IterRecord:
    iteration: int
    objective: float
    volume: float
    proj_grad_norm: float
    step: float
    F: tuple
    coeffs: np.ndarray
    event: str = ""


@dataclass
class OptimState:
    """Current iterate and its history.

    ``objective`` is ``Lambda_{F,h}`` (reported with its natural sign in both
    modes); ``proj_grad_norm`` is the Euclidean norm of the projected gradient in
    dictionary coefficients.
    """

    phi: DomainMap
    objective: float
    proj_grad_norm: float
    volume: float
    F: tuple
    iteration: int = 0
    converged: bool = False
    flag: str = ""
    log: list = field(default_factory=list)
    criticality: float = float("nan")

    def write_csv(self, path, fingerprint="", version=""):
        width = max(r.coeffs.size for r in self.log)
        with open(path, "w", newline="") as fh:
            fh.write(f"# fingerprint={fingerprint} version={version}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "objective", "volume", "proj_grad_norm", "step", "F", "event"]
                       + [f"c{i}" for i in range(width)])
            for r in self.log:
                c = np.zeros(width)
                c[:r.coeffs.size] = r.coeffs
                w.writerow([r.iteration, f"{r.objective:.17g}", f"{r.volume:.17g}",
                            f"{r.proj_grad_norm:.17g}", f"{r.step:.17g}",
                            " ".join(map(str, r.F)), r.event] + [f"{v:.17g}" for v in c])


class _Problem:
    """Evaluates the objective, cluster and projected gradient at a map."""

    def __init__(self, cfg, fields):
        self.cfg = cfg
        self.fields = fields
        self.basis = cached_basis(cfg.n, cfg.d)
        self.quad = disk_rule(cfg.G, cfg.M)
        self.sign = 1.0 if cfg.mode == "min" else -1.0

    def solve(self, phi, F):
        res = eigensolve(assemble(phi, self.cfg.n, self.cfg.m, self.basis, self.quad),
                         max(F) + 1)
        return res

    def cluster(self, res, F):
        cl = make_cluster(res, F, self.cfg.cluster_rtol)
        event = ""
        if not cl.separated:
            # re-cluster around the tracked labels; the multiplicity may change
            for c in cluster_eigenvalues(res, self.cfg.cluster_rtol, count=max(F) + 1):
                if min(F) in c.indices:
                    cl = c
                    break
            event = f"recluster {list(F)}->{list(cl.indices)}"
            cl.require_separated()
        return cl, event

    def value(self, res, cl):
        h = min(self.cfg.h, cl.size)
        return elementary_symmetric(res.eigenvalues[cl.indices[0] - 1:cl.indices[-1]], h)

    def gradient(self, res, cl, phi):
        h = min(self.cfg.h, cl.size)
        g, nvec = hadamard_gradient(cl, res, phi, self.fields, h, self.cfg.M)
        g = self.sign * g
        pg = g - (g @ nvec) / (nvec @ nvec) * nvec
        return g, nvec, pg


def project_volume(phi, target, quad=None):
    """Uniform dilation of ``phi`` so that the area equals ``target``."""
    V = volume(phi, quad)
    return phi.scaled(np.sqrt(target / V))


def gradient(state, cfg, fields=None):
    """Raw gradient, constraint normal and projected gradient at ``state.phi``."""
    prob = _Problem(cfg, fields or default_dictionary(cfg.dictionary_degree))
    res = prob.solve(state.phi, state.F)
    cl, _ = prob.cluster(res, state.F)
    return prob.gradient(res, cl, state.phi)


def minimize(phi0, cfg=None, fields=None, callback=None):
    """Projected-gradient descent with Armijo backtracking and Barzilai-Borwein steps.

    Returns the final :class:`OptimState`; ``flag`` is ``""`` on convergence,
    ``"max_iters"``, ``"line_search_failed"`` or ``"bilipschitz_guard"``.
    """
    cfg = cfg or OptimConfig()
    if cfg.mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {cfg.mode!r}")
    fields = fields or default_dictionary(cfg.dictionary_degree)
    prob = _Problem(cfg, fields)
    quad = prob.quad
    target = cfg.target_volume if cfg.target_volume is not None else volume(phi0, quad)
    phi = project_volume(phi0, target, quad)
    F = tuple(cfg.F)
    res = prob.solve(phi, F)
    cl, event = prob.cluster(res, F)
    F = cl.indices
    obj = prob.value(res, cl)
    g, nvec, pg = prob.gradient(res, cl, phi)
    state = OptimState(phi, obj, float(np.linalg.norm(pg)), volume(phi, quad), F)
    state.log.append(IterRecord(0, obj, state.volume, state.proj_grad_norm, 0.0, F,
                                phi.coeffs.ravel().copy(), event))
    alpha = cfg.initial_step / max(state.proj_grad_norm, 1e-300)
    prev = None
    for it in range(1, cfg.max_iters + 1):
        if state.proj_grad_norm <= cfg.gtol * abs(obj):
            state.converged = True
            break
        direction = -pg
        if prev is not None:
            s_vec, y_vec = prev
            sy = s_vec @ y_vec
            if sy > 0:
                alpha = (s_vec @ s_vec) / sy
        slope = direction @ pg
        accepted = False
        guard = False
        for _ in range(cfg.max_backtracks):
            step = alpha * direction
            psi = sum((c * f for c, f in zip(step, fields)), PerturbationField(np.zeros((2, 3))))
            try:
                trial = project_volume(phi.perturbed(psi, 1.0), target, quad)
                if not bilipschitz_check(trial, None).passed:
                    raise NotBiLipschitz("trial map rejected", None)
                tres = prob.solve(trial, F)
                tcl, tevent = prob.cluster(tres, F)
                tobj = prob.value(tres, tcl)
            except (NotBiLipschitz, SingularJacobian, NotCoercive, ClusterGapError):
                guard = True
                alpha *= 0.5
                continue
            if prob.sign * (tobj - obj) <= ARMIJO_C * alpha * slope + DESCENT_TOL * abs(obj):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            state.flag = "bilipschitz_guard" if guard else "line_search_failed"
            break
        tg, tn, tpg = prob.gradient(tres, tcl, trial)
        prev = (step, tpg - pg)
        phi, res, cl, obj, pg = trial, tres, tcl, tobj, tpg
        F = cl.indices
        state.phi, state.objective, state.F = phi, obj, F
        state.proj_grad_norm = float(np.linalg.norm(pg))
        state.volume = volume(phi, quad)
        state.iteration = it
        state.log.append(IterRecord(it, obj, state.volume, state.proj_grad_norm,
                                    float(np.linalg.norm(step)), F, phi.coeffs.ravel().copy(),
                                    tevent))
        if callback is not None:
            callback(state)
    else:
        if state.proj_grad_norm <= cfg.gtol * abs(obj):
            state.converged = True
        else:
            state.flag = "max_iters"
    if state.converged:
        state.flag = ""
    state.criticality = criticality_residual(cl, res, phi, cfg.M).residual
    return state
