"""Command-line driver reproducing the iteration-count tables and spectra.

Exit codes: 0 on success/convergence, 2 if any solve failed to converge,
1 on input errors.
"""

import argparse
import itertools
import sys

import numpy as np

from . import amg, fem, problems, spectral, vtkio
from .mesh import build_unit_square


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_run_flags(p):
    p.add_argument("--n", type=int, default=32, help="mesh subdivisions per side")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--k-min", type=float, default=0.5, dest="k_min")
    p.add_argument("--k-max", type=float, default=1.5, dest="k_max")
    p.add_argument("--pc", choices=["lu", "amg"], default="lu")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=5000, dest="max_iters")
    p.add_argument("--smoother-apps", type=int, default=None, dest="smoother_apps")
    p.add_argument("--out", default=None, help="append a CSV row to this file")
    p.add_argument("--vtk", default=None, help="export u, p, u_f, k to this path")


def build_parser():
    ap = _Parser(prog="magmapc",
                 description="Block-preconditioned MINRES runs for the "
                             "simplified magma/mantle system")
    sub = ap.add_subparsers(dest="command", required=True)
    for case in problems.CASES:
        p = sub.add_parser(case, help=f"run the {case} problem")
        _add_run_flags(p)
        p.set_defaults(case=case)

    sp = sub.add_parser("spectra", help="spectral bounds verification "
                                        "(small meshes)")
    sp.add_argument("--n", type=int, default=8)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--k-min", type=float, default=0.5, dest="k_min")
    sp.add_argument("--k-max", type=float, default=1.5, dest="k_max")
    sp.add_argument("--out", default=None)

    sw = sub.add_parser("sweep", help="run a grid of configurations from a "
                                      "plain-text file")
    sw.add_argument("config", help="text file: one 'key=v1,v2 ...' line per grid")
    sw.add_argument("--out", default=None)
    return ap


def _case_config(args):
    smoother = None
    if args.smoother_apps is not None:
        smoother = amg.SmootherConfig(applications=args.smoother_apps)
    return problems.CaseConfig(
        case=args.case, n=args.n, alpha=args.alpha, k_star=args.k_min,
        k_sup=args.k_max, pc=args.pc, tol=args.tol, max_iters=args.max_iters,
        smoother=smoother)


def _emit_csv(path, header, rows):
    import os
    write_header = not (path and os.path.exists(path))
    fh = open(path, "a") if path else sys.stdout
    try:
        if write_header:
            fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")
    finally:
        if path:
            fh.close()


def _export_vtk(path, result):
    mesh, vmap, pmap = result.mesh, result.vmap, result.pmap
    u, p = result.report.u, result.report.p
    nv = mesh.n_vertices
    k = result.kfield
    kv = np.broadcast_to(
        np.asarray(k(mesh.vertices[:, 0], mesh.vertices[:, 1]), float), (nv,))
    phi = problems.constant_field(problems.WEDGE_POROSITY)
    uf = problems.fluid_velocity(mesh, vmap, pmap, u, p, k, phi)
    ns = vmap.n_scalar
    uvert = np.column_stack([u[:nv], u[ns:ns + nv]])
    vtkio.write_vtk(path, mesh,
                    point_scalars={"p": p[:nv], "k": kv},
                    point_vectors={"u": uvert},
                    cell_vectors={"u_f": uf})


def _run_one(cfg, out=None, vtk=None, echo=True):
    result = problems.run_case(cfg)
    if echo:
        status = "converged" if result.converged else "NOT CONVERGED"
        print(f"{cfg.case} n={cfg.n} alpha={cfg.alpha:g} pc={cfg.pc}: "
              f"{result.iterations} iterations ({status}), "
              f"N={result.n_dofs}, {result.seconds:.2f}s")
        if result.vel_err is not None:
            print(f"  errors: |u-u_h| = {result.vel_err:.3e}, "
                  f"|p-p_h| = {result.p_err:.3e}")
    if out is not None:
        _emit_csv(out, problems.CaseResult.CSV_HEADER, [result.csv_row()])
    if vtk is not None:
        _export_vtk(vtk, result)
    return result


def _cmd_spectra(args):
    mesh = build_unit_square(args.n)
    vmap, pmap = fem.taylor_hood(mesh)
    k = problems.mms_kfield(args.k_min, args.k_max)
    system = fem.assemble_system(mesh, vmap, pmap, args.alpha, k,
                                 g_from_gravity=False)
    system = fem.apply_dirichlet(system, vmap,
                                 [(0, problems.zero_velocity)])
    rep = spectral.bounds_report(system, mesh, vmap, pmap, args.k_min)
    print(rep)
    if args.out:
        _emit_csv(args.out, spectral.BoundsReport.CSV_HEADER, [rep.csv_row()])
    return 0 if (rep.schur_contained and rep.eigs_contained) else 2


_SWEEP_KEYS = {
    "case": str, "n": int, "alpha": float, "k_min": float, "k_max": float,
    "pc": str, "tol": float, "max_iters": int, "smoother_apps": int,
}


def parse_sweep_config(text):
    """Each non-comment line is a set of key=value(,value...) pairs; the line
    expands to the cartesian product of its value grids."""
    configs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        grids = {}
        for tokenum in line.split():
            if "=" not in tokenum:
                raise ValueError(f"line {lineno}: expected key=value, got "
                                 f"{tokenum!r}")
            key, vals = tokenum.split("=", 1)
            key = key.replace("-", "_")
            if key not in _SWEEP_KEYS:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            conv = _SWEEP_KEYS[key]
            grids[key] = [conv(v) for v in vals.split(",")]
        if "case" not in grids:
            raise ValueError(f"line {lineno}: missing 'case'")
        keys = list(grids)
        for combo in itertools.product(*(grids[k] for k in keys)):
            kw = dict(zip(keys, combo))
            apps = kw.pop("smoother_apps", None)
            kw["k_star"] = kw.pop("k_min", 0.5)
            kw["k_sup"] = kw.pop("k_max", 1.5)
            if apps is not None:
                kw["smoother"] = amg.SmootherConfig(applications=apps)
            configs.append(problems.CaseConfig(**kw))
    return configs


def _cmd_sweep(args):
    with open(args.config) as fh:
        text = fh.read()
    configs = parse_sweep_config(text)
    all_ok = True
    rows = []
    for cfg in configs:
        result = _run_one(cfg, out=None, echo=True)
        rows.append(result.csv_row())
        all_ok &= result.converged
    _emit_csv(args.out, problems.CaseResult.CSV_HEADER, rows)
    return 0 if all_ok else 2


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "spectra":
            return _cmd_spectra(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        cfg = _case_config(args)
        result = _run_one(cfg, out=args.out, vtk=args.vtk)
        return 0 if result.converged else 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
