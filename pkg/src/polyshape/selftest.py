"""Acceptance suite: each criterion is a function returning a :class:`CriterionResult`.

Output lines contain no timings so that runs with different worker counts can
be compared byte for byte.
"""
from dataclasses import dataclass, field
import hashlib
import json

import numpy as np

from . import oracles
from .discretization import assemble, cached_basis, eigensolve, workers
from .geometry import DomainMap, PerturbationField as PF, volume_derivative
from .optimize import OptimConfig, minimize
from .quadrature import disk_rule
from . import shape_calculus as sc
from .spectrum import cluster_eigenvalues, duality_check, make_cluster

PAIRS = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.summary}"


def _solve(phi, n, m, count=10, d=16):
    return eigensolve(assemble(phi, n, m, cached_basis(n, d), disk_rule()), count)


def _rel(a, b):
    return abs(a - b) / abs(b)


def criterion_1():
    I = DomainMap.identity()
    checks = {}
    for (n, m), tol in [((1, 0), 1e-5), ((2, 0), 1e-4), ((2, 1), 1e-4)]:
        ref = oracles.disk_eigenvalues(n, m, 3)[0][0]
        lam = _solve(I, n, m, 3, d=20).values[0]
        checks[f"P{n}{m}_lambda1"] = (lam, ref, _rel(lam, ref), tol)
    r = _solve(I, 1, 0, 4, d=20)
    ref = oracles.disk_eigenvalues(1, 0, 3)[1][0]
    cl = make_cluster(r, [2, 3])
    checks["P10_lambda2"] = (r.values[1], ref, _rel(r.values[1], ref), 1e-5)
    checks["P10_lambda3"] = (r.values[2], ref, _rel(r.values[2], ref), 1e-5)
    checks["P10_spread23"] = (cl.spread, 0.0, cl.spread, 1e-7)
    ok = all(err <= tol for _, _, err, tol in checks.values())
    worst = max(err / tol for _, _, err, tol in checks.values())
    return CriterionResult(1, "disk eigenvalues vs radial oracles", ok,
                           f"worst err/tol = {worst:.3e}",
                           {k: {"value": v, "oracle": o, "err": e, "tol": t}
                            for k, (v, o, e, t) in checks.items()})


def criterion_2():
    I = DomainMap.identity()
    worst, det = 0.0, {}
    for n, m in PAIRS:
        ref = _solve(I, n, m, 6).values
        for c in (0.5, 2.0):
            lam = _solve(DomainMap.dilation(c), n, m, 6).values
            err = float(np.max(np.abs(lam / (c ** (-2 * (n - m)) * ref) - 1)))
            det[f"P{n}{m}_c{c:g}"] = err
            worst = max(worst, err)
    return CriterionResult(2, "dilation scaling law", worst <= 1e-8,
                           f"max rel err = {worst:.3e} (tol 1e-8)", det)


def hadamard_scenarios():
    """``(label, phi, psi, n, m, F, h)`` for the Hadamard-versus-FD criterion."""
    base = DomainMap.identity().perturbed(PF.harmonic_gradient(2) * 0.05 + PF.radial(1) * 0.03, 1)
    tri = DomainMap.identity().perturbed(PF.harmonic_gradient(3) * 0.04, 1)
    aff = DomainMap.affine([[1.1, 0.15], [-0.05, 0.9]]).perturbed(PF.random(3, 11, 0.02), 1)
    psi = PF.harmonic_gradient(2) + PF.radial(1) * 0.5 + PF.harmonic_gradient(3, "im") * 0.3
    return [
        ("P10 simple", base, psi, 1, 0, (1,), 1),
        ("P21 simple lambda2", base, psi, 2, 1, (2,), 1),
        ("P30 simple, random field", aff, PF.random(3, 12, 0.5), 3, 0, (1,), 1),
        ("P10 double cluster h=1", tri, psi, 1, 0, (2, 3), 1),
        ("P20 double cluster h=2", tri, psi, 2, 0, (2, 3), 2),
    ]


def criterion_3():
    det, ok, worst = {}, True, 0.0
    for label, phi, psi, n, m, F, h in hadamard_scenarios():
        rep = sc.hadamard_check(phi, psi, n, m, F, h)
        good = rep.rel_err <= 1e-5 and 1.5 <= rep.order <= 2.5
        ok &= good
        worst = max(worst, rep.rel_err)
        det[label] = {"formula": rep.formula, "richardson": rep.richardson,
                      "rel_err": rep.rel_err, "order": rep.order, "spread": rep.extra["spread"]}
    orders = [v["order"] for v in det.values()]
    return CriterionResult(3, "Hadamard formula vs central FD", ok,
                           f"max rel err = {worst:.3e} (tol 1e-5), orders in "
                           f"[{min(orders):.3f}, {max(orders):.3f}]", det)


def criterion_4():
    I = DomainMap.identity()
    det, worst = {}, 0.0
    for n, m in PAIRS:
        r = _solve(I, n, m, 2)
        cl = make_cluster(r, [1])
        val = sc.hadamard_dLambda(cl, r, I, PF.dilation(), 1)
        target = -2 * (n - m) * r.values[0]
        # (-Delta)^m-normalized eigenfunction: v_B = sqrt(lambda) v_A
        samples, tr = sc.cluster_traces(cl, r, I)
        circ_B = float(np.dot(samples.weights, r.values[0] * tr[:, 0] ** 2))
        e1 = _rel(val, target)
        e2 = _rel(circ_B, 2 * (n - m) * r.values[0])
        worst = max(worst, e1, e2)
        det[f"P{n}{m}"] = {"formula": val, "target": target, "rel_err": e1,
                           "boundary_integral_B_normalized": circ_B, "rel_err_integral": e2}
    return CriterionResult(4, "dilation identity on the disk", worst <= 1e-5,
                           f"max rel err = {worst:.3e} (tol 1e-5)", det)


def criterion_5():
    I = DomainMap.identity()
    det, worst = {}, 0.0
    for n, m in PAIRS:
        r = _solve(I, n, m, 4)
        for F in ((1,), (2, 3)):
            res = sc.criticality_residual(make_cluster(r, F), r, I).residual
            det[f"P{n}{m}_F{''.join(map(str, F))}"] = res
            worst = max(worst, res)
    ell = DomainMap.ellipse(0.3)
    r = _solve(ell, 1, 0, 2)
    counter = sc.criticality_residual(make_cluster(r, [1]), r, ell).residual
    det["ellipse0.3_P10_F1"] = counter
    ok = worst <= 1e-5 and counter >= 0.05
    return CriterionResult(5, "ball criticality and ellipse counterexample", ok,
                           f"max disk residual = {worst:.3e} (tol 1e-5), "
                           f"ellipse residual = {counter:.3e} (>= 0.05)", det)


def crossing_data(step, n=1, m=0, F=(2, 3), half_width=2):
    """``t`` grid and ``(lambda_2, Lambda_{F,1}, Lambda_{F,2})`` along the ellipse family."""
    ts = step * np.arange(-half_width, half_width + 1)
    lam2, L1, L2 = [], [], []
    for t in ts:
        r = _solve(DomainMap.ellipse(float(t)), n, m, max(F) + 1)
        v = r.eigenvalues[min(F) - 1:max(F)]
        lam2.append(v[0])
        L1.append(v.sum())
        L2.append(v[0] * v[1])
    return ts, np.array(lam2), np.array(L1), np.array(L2)


def crossing_ratio(step):
    """Slope gap of ``lambda_2`` at ``t = 0`` against the second-difference bound of ``Lambda_{F,h}``."""
    ts, lam2, L1, L2 = crossing_data(step)
    c = len(ts) // 2
    C1 = float(np.max(np.abs(L1[:-2] - 2 * L1[1:-1] + L1[2:]))) / step ** 2
    C2 = float(np.max(np.abs(L2[:-2] - 2 * L2[1:-1] + L2[2:]))) / step ** 2
    right = (lam2[c + 1] - lam2[c]) / step
    left = (lam2[c] - lam2[c - 1]) / step
    gap = abs(right - left)
    return {"step": step, "second_diff_bound": C1, "second_diff_bound_h2": C2,
            "slope_left": left, "slope_right": right, "slope_gap": gap,
            "ratio": gap / (C1 * step)}


def criterion_6():
    a = crossing_ratio(1e-2)
    b = crossing_ratio(5e-3)
    # bounded as the step halves: the bound must not grow like 1/step
    bounded = all(b[k] <= 2.0 * a[k] for k in ("second_diff_bound", "second_diff_bound_h2"))
    ok = a["ratio"] >= 10 and b["ratio"] >= 10 and bounded
    return CriterionResult(6, "crossing smoothness along the ellipse sweep", ok,
                           f"ratio = {a['ratio']:.3e} at step 1e-2, {b['ratio']:.3e} at 5e-3 "
                           f"(>= 10), second-difference bound {a['second_diff_bound']:.3e} -> "
                           f"{b['second_diff_bound']:.3e}", {"coarse": a, "fine": b})


def criterion_7():
    worst, det = 0.0, {}
    maps = {"disk": DomainMap.identity(), "ellipse0.3": DomainMap.ellipse(0.3),
            "trefoil": DomainMap.identity().perturbed(PF.harmonic_gradient(3) * 0.04, 1)}
    for name, phi in maps.items():
        for n, m in PAIRS:
            r = _solve(phi, n, m, 10)
            for cl in cluster_eigenvalues(r, count=10):
                res = duality_check(cl.values)
                worst = max(worst, res)
            det[f"{name}_P{n}{m}"] = worst
    return CriterionResult(7, "Gamma/Lambda duality on computed clusters", worst <= 1e-12,
                           f"max residual = {worst:.3e} (tol 1e-12)", det)


def operator_scenarios(seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(3):
        phi = DomainMap.identity().perturbed(PF.random(3, int(rng.integers(1 << 30)), 0.05), 1)
        psi = PF.random(3, int(rng.integers(1 << 30)), 1.0)
        n = k + 1
        B = cached_basis(n, 6)
        i, j = (int(v) for v in rng.choice(len(B), 2, replace=False))
        out.append((phi, psi, n, B.coeffs[i], B.coeffs[j]))
    return out


def criterion_8():
    det, worst = {}, 0.0
    for k, (phi, psi, n, u1, u2) in enumerate(operator_scenarios()):
        for rep in (sc.d_det_check(phi, psi), sc.d_laplacian_check(phi, psi, u1),
                    sc.d_polyform_check(phi, psi, u1, u2, n)):
            det[f"scenario{k}_{rep.name}"] = {"rel_err": rep.rel_err, "order": rep.order,
                                              "fd_exact": rep.fd_exact}
            worst = max(worst, rep.rel_err)
    return CriterionResult(8, "operator differentials vs FD (det, Laplacian, poly-form)",
                           worst <= 1e-5, f"max rel err = {worst:.3e} (tol 1e-5)", det)


def criterion_9():
    det, worst = {}, 0.0
    for k, (phi, psi, *_rest) in enumerate(operator_scenarios(7)):
        rep = sc.d_volume_check(phi, psi)
        det[f"scenario{k}"] = rep.rel_err
        worst = max(worst, rep.rel_err)
    I = DomainMap.identity()
    harm = max(abs(volume_derivative(I, PF.harmonic_gradient(k, p)))
               for k in range(1, 7) for p in ("re", "im"))
    det["harmonic_max_abs_dV"] = harm
    ok = worst <= 1e-6 and harm <= 1e-10
    return CriterionResult(9, "volume derivative vs FD", ok,
                           f"max rel err = {worst:.3e} (tol 1e-6), harmonic |dV| = {harm:.3e} "
                           f"(tol 1e-10)", det)


def criterion_10():
    ref = oracles.disk_eigenvalues(1, 0, 1)[0][0]
    st = minimize(DomainMap.ellipse(0.15), OptimConfig(target_volume=np.pi))
    err = _rel(st.objective, ref)
    ok = err <= 1e-2 and st.criticality <= 1e-3 and st.iteration <= 200
    return CriterionResult(10, "optimizer from ellipse(0.15)", ok,
                           f"lambda1 = {st.objective:.9f} (rel err {err:.3e}), criticality "
                           f"{st.criticality:.3e}, {st.iteration} iterations, volume err "
                           f"{abs(st.volume - np.pi):.1e}",
                           {"objective": st.objective, "criticality": st.criticality,
                            "iterations": st.iteration, "flag": st.flag})


def _digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=repr).encode()).hexdigest()


DETERMINISM_SUBSET = (1, 3, 5, 7)


def criterion_11(worker_counts=(1, 2, 8)):
    """Re-run a subset of criteria and the raw matrices under several thread counts."""
    digests = {}
    phi = hadamard_scenarios()[0][1]
    for k in worker_counts:
        with workers(k):
            forms = assemble(phi, 3, 1, cached_basis(3), disk_rule())
            payload = [hashlib.sha256(forms.A.tobytes()).hexdigest(),
                       hashlib.sha256(forms.B.tobytes()).hexdigest()]
            for num in DETERMINISM_SUBSET:
                res = CRITERIA[num]()
                payload.append(res.line())
                payload.append(_digest(res.details))
        digests[k] = _digest(payload)
    ok = len(set(digests.values())) == 1
    return CriterionResult(11, "determinism across worker threads", ok,
                           f"{len(set(digests.values()))} distinct digest(s) over workers "
                           f"{list(worker_counts)}", {str(k): v for k, v in digests.items()})


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
            11: criterion_11}


def run(only=None, echo=print):
    """Run the selected criteria, echoing one line each; returns the results."""
    results = []
    for num in sorted(CRITERIA):
        if only and num not in only:
            continue
        res = CRITERIA[num]()
        echo(res.line())
        results.append(res)
    return results
