"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (including a
check that misses its configured tolerance).
"""
import argparse
import io
import json
import sys

import numpy as np
from scipy import linalg

from . import __version__, kernels, selftest as selftest_mod
from . import shape_calculus as sc
from .config import load
from .discretization import assemble, cached_basis, eigensolve, workers
from .errors import ConfigError, PolyshapeError
from .geometry import DomainMap
from .optimize import OptimConfig, minimize
from .quadrature import disk_rule
from .spectrum import cluster_eigenvalues, cluster_ids, elementary_symmetric, make_cluster

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _fmt(v):
    return f"{float(v):.17g}"


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        raise TypeError(f"not serializable: {type(o).__name__}")
    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def _header(cfg, extra=None):
    h = {"version": __version__, "config_fingerprint": cfg.fingerprint(), "backend": kernels.backend_name()}
    h.update(extra or {})
    return h


def _solve(cfg, phi=None, count=None, quad=None):
    phi = phi if phi is not None else cfg.phi()
    quad = quad or disk_rule(cfg.G, cfg.M)
    forms = assemble(phi, cfg.n, cfg.m, cached_basis(cfg.n, cfg.d), quad)
    return eigensolve(forms, count or cfg.count)


def cmd_solve(cfg, args):
    res = _solve(cfg)
    half = _solve(cfg, quad=disk_rule(max(1, cfg.G // 2), max(16, cfg.M // 2)))
    delta = float(np.max(np.abs(half.values / res.values - 1)))
    clusters = cluster_eigenvalues(res, cfg.cluster_rtol, cfg.count)
    ids = cluster_ids(clusters, cfg.count)
    if args.format == "json":
        out = _json({**_header(cfg, {"fingerprint": res.fingerprint}),
                     "eigenvalues": res.values, "cluster_ids": ids,
                     "clusters": [c.as_dict() for c in clusters],
                     "self_convergence_delta": delta, "cluster_rtol": cfg.cluster_rtol})
    else:
        buf = io.StringIO()
        buf.write(f"# version={__version__} fingerprint={res.fingerprint} "
                  f"config_fingerprint={cfg.fingerprint()} n={cfg.n} m={cfg.m} d={cfg.d} "
                  f"G={cfg.G} M={cfg.M}\n")
        buf.write(f"# self_convergence_delta={_fmt(delta)} cluster_rtol={cfg.cluster_rtol:g}\n")
        buf.write("j,lambda,cluster\n")
        for j, (v, c) in enumerate(zip(res.values, ids), start=1):
            buf.write(f"{j},{_fmt(v)},{c}\n")
        out = buf.getvalue()
    _emit(out, cfg.out)
    if args.export_matrices:
        res.forms.to_csv(args.export_matrices + "_A.csv", args.export_matrices + "_B.csv")
    return EXIT_OK


def sweep_family(cfg):
    """``t -> DomainMap`` for the configured sweep family."""
    base = cfg.phi()
    fam = cfg.family
    if fam == "ellipse":
        return lambda t: base.composed_with_linear(np.diag([1 + t, 1 / (1 + t)])) \
            if not base.is_identity else DomainMap.ellipse(t)
    if fam == "dilation":
        return lambda t: base.scaled(1 + t)
    if fam == "constant":
        return lambda t: base
    if fam == "perturb":
        psi = cfg.psi()
        return lambda t: base.perturbed(psi, t)
    raise ConfigError(f"unknown sweep family {fam!r} (ellipse, dilation, constant, perturb)")


def cmd_sweep(cfg, args):
    fam = sweep_family(cfg)
    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.t_steps)
    F, k = tuple(cfg.F), cfg.count
    buf = io.StringIO()
    buf.write(f"# version={__version__} config_fingerprint={cfg.fingerprint()} family={cfg.family} "
              f"n={cfg.n} m={cfg.m} F={'-'.join(map(str, F))} cluster_rtol={cfg.cluster_rtol:g}\n")
    cols = ["t"] + [f"lambda_{j}" for j in range(1, k + 1)] + [f"cluster_{j}" for j in range(1, k + 1)] \
        + [f"Lambda_F_{h}" for h in range(1, len(F) + 1)] + ["fingerprint"]
    buf.write(",".join(cols) + "\n")
    for t in ts:
        res = _solve(cfg, fam(float(t)), k)
        ids = cluster_ids(cluster_eigenvalues(res, cfg.cluster_rtol, k), k)
        vals = res.eigenvalues[min(F) - 1:max(F)]
        Ls = [elementary_symmetric(vals, h) for h in range(1, len(F) + 1)]
        row = [_fmt(t)] + [_fmt(v) for v in res.values] + [str(c) for c in ids] \
            + [_fmt(v) for v in Ls] + [res.fingerprint]
        buf.write(",".join(row) + "\n")
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_hadamard_check(cfg, args):
    phi, psi = cfg.phi(), cfg.psi()
    rep = sc.hadamard_check(phi, psi, cfg.n, cfg.m, tuple(cfg.F), cfg.h,
                            d=cfg.d, quad=disk_rule(cfg.G, cfg.M), M=cfg.M)
    ok = rep.passed(cfg.tol)
    _emit(_json({**_header(cfg), **rep.to_dict(), "tol": cfg.tol, "passed": ok}), cfg.out)
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_opderiv_check(cfg, args):
    phi, psi = cfg.phi(), cfg.psi()
    quad = disk_rule(cfg.G, cfg.M)
    basis = cached_basis(cfg.n, cfg.d)
    for label, j in (("u1", cfg.u1), ("u2", cfg.u2)):
        if not 1 <= j <= len(basis):
            raise ConfigError(f"{label}={j} outside basis range 1..{len(basis)}")
    u1, u2 = basis.coeffs[cfg.u1 - 1], basis.coeffs[cfg.u2 - 1]
    checks = {
        "det": lambda: sc.d_det_check(phi, psi),
        "laplacian": lambda: sc.d_laplacian_check(phi, psi, u1),
        "polyform": lambda: sc.d_polyform_check(phi, psi, u1, u2, cfg.n, quad, cfg.M),
        "volume": lambda: sc.d_volume_check(phi, psi, quad, cfg.M),
    }
    names = list(checks) if cfg.check == "all" else cfg.check.split(",")
    unknown = [n for n in names if n not in checks]
    if unknown:
        raise ConfigError(f"unknown check(s) {unknown}; choose from {list(checks)} or all")
    reports = {name: checks[name]() for name in names}
    ok = all(r.passed(cfg.tol) for r in reports.values())
    _emit(_json({**_header(cfg), "tol": cfg.tol, "passed": ok,
                 "reports": {k: r.to_dict() for k, r in reports.items()}}), cfg.out)
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_criticality(cfg, args):
    phi = cfg.phi()
    res = _solve(cfg, phi, max(cfg.count, max(cfg.F) + 1))
    cl = make_cluster(res, cfg.F, cfg.cluster_rtol)
    rep = sc.criticality_residual(cl, res, phi, cfg.M)
    out = {**_header(cfg, {"fingerprint": res.fingerprint}), **rep.to_dict(),
           "cluster": cl.as_dict(), "tol": cfg.tol}
    ok = not rep.degenerate and rep.residual <= cfg.tol
    fields = cfg.field_list()
    if fields:
        fit = sc.lagrange_fit(cl, res, phi, fields, cfg.h, cfg.M)
        out["lagrange"] = fit.to_dict()
    out["passed"] = ok
    _emit(_json(out), cfg.out)
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_optimize(cfg, args):
    ocfg = OptimConfig(n=cfg.n, m=cfg.m, F=tuple(cfg.F), h=cfg.h, d=cfg.d, G=cfg.G, M=cfg.M,
                       gtol=cfg.gtol, max_iters=cfg.max_iters,
                       dictionary_degree=cfg.dictionary_degree,
                       target_volume=cfg.target_volume, mode=cfg.mode,
                       cluster_rtol=cfg.cluster_rtol)
    st = minimize(cfg.phi(), ocfg)
    if args.trajectory:
        st.write_csv(args.trajectory, st.phi.fingerprint(), __version__)
    out = {**_header(cfg, {"fingerprint": st.phi.fingerprint()}),
           "objective": st.objective, "F": list(st.F), "iterations": st.iteration,
           "proj_grad_norm": st.proj_grad_norm, "volume": st.volume,
           "criticality_residual": st.criticality, "converged": st.converged, "flag": st.flag,
           "map": st.phi.to_text("phi")}
    _emit(_json(out), cfg.out)
    if cfg.mode == "max":
        return EXIT_OK  # behavior is recorded, not asserted
    return EXIT_OK if st.converged else EXIT_NUMERIC


def cmd_selftest(cfg, args):
    only = {int(v) for v in args.only.split(",")} if args.only else None
    lines = []

    def echo(line):
        lines.append(line)
        print(line, flush=True)

    results = selftest_mod.run(only, echo)
    failed = [r.number for r in results if not r.passed]
    summary = f"{len(results) - len(failed)}/{len(results)} criteria passed"
    echo(summary)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(_json({**_header(cfg), "results": [
                {"number": r.number, "title": r.title, "passed": r.passed,
                 "summary": r.summary, "details": r.details} for r in results]}))
    return EXIT_OK if not failed else EXIT_NUMERIC


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "hadamard-check": cmd_hadamard_check,
    "opderiv-check": cmd_opderiv_check,
    "criticality": cmd_criticality,
    "optimize": cmd_optimize,
    "selftest": cmd_selftest,
}

_OVERRIDES = [
    ("--n", int, "operator order n"), ("--m", int, "operator order m"),
    ("--d", int, "basis degree"), ("--G", int, "radial quadrature nodes"),
    ("--M", int, "angular quadrature nodes"), ("--map", str, "domain map spec"),
    ("--field", str, "perturbation field spec"),
    ("--fields", str, "';'-separated field specs for the Lagrange fit"),
    ("--F", str, "cluster labels, e.g. 2,3 or 2-3"), ("--h", int, "symmetric-function degree"),
    ("--count", int, "number of eigenvalues"), ("--cluster-rtol", float, "cluster tolerance"),
    ("--tol", float, "pass tolerance"), ("--check", str, "det,laplacian,polyform,volume or all"),
    ("--u1", int, "first basis function (1-based)"), ("--u2", int, "second basis function"),
    ("--family", str, "sweep family"), ("--t-min", float, "sweep start"),
    ("--t-max", float, "sweep end"), ("--t-steps", int, "sweep points"),
    ("--gtol", float, "relative projected-gradient tolerance"),
    ("--max-iters", int, "optimizer iterations"),
    ("--dictionary-degree", int, "largest harmonic-gradient degree"),
    ("--target-volume", float, "area constraint"), ("--mode", str, "min or max"),
    ("--seed", int, "random seed"), ("--workers", int, "assembly threads"),
    ("--out", str, "output path (default stdout)"),
]


def build_parser():
    p = argparse.ArgumentParser(prog="polyshape", description=(
        "Eigenvalues of (-Delta)^n u = lambda (-Delta)^m u on polynomial images of the disk, "
        "their shape derivatives, and area-constrained optimization."))
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        for flag, typ, hlp in _OVERRIDES:
            sp.add_argument(flag, type=typ, default=None, help=hlp)
        if name == "solve":
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
            sp.add_argument("--export-matrices", metavar="PREFIX",
                            help="write PREFIX_A.csv and PREFIX_B.csv")
        if name == "optimize":
            sp.add_argument("--trajectory", help="trajectory CSV path")
        if name == "selftest":
            sp.add_argument("--only", help="comma-separated criterion numbers")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {flag.lstrip("-").replace("-", "_"): getattr(args, flag.lstrip("-").replace("-", "_"))
                 for flag, _, _ in _OVERRIDES}
    try:
        cfg = load(args.config, overrides)
        with workers(cfg.workers):
            return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PolyshapeError, linalg.LinAlgError, ArithmeticError, ZeroDivisionError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
