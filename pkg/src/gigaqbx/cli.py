"""Command-line entry points.

Every run writes its outputs and a ``manifest.json`` into ``--out``; the
manifest's ``argv`` replays the run and reproduces the outputs exactly.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from ._jit import BACKEND

THRESHOLD_FAILURE = 1
USAGE_ERROR = 2
TRANSLATION_C_MAX = 1.01


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _geometry_arg(p):
    p.add_argument("--geometry", default="sphere:2", help="sphere:L or urchin:k")
    p.add_argument("--mesh", help="mesh container (overrides --geometry)")
    p.add_argument("--mesh-order", type=int, default=4)
    p.add_argument("--urchin-tol", type=float, default=1e-4)


def _pipeline_args(p):
    _geometry_arg(p)
    p.add_argument("--quad-order", type=int, default=11)
    p.add_argument("--eps-d", type=float, default=0.025)
    p.add_argument("--c-kappa", type=float, default=0.8)
    p.add_argument("--eps-ta", type=float, default=0.05)


def _fmm_args(p):
    p.add_argument("--pqbx", type=int, default=5)
    p.add_argument("--pfmm", type=int, default=10)
    p.add_argument("--tcf", type=float, default=0.9)
    p.add_argument("--nmax", type=int, default=512)
    p.add_argument("--no-demote", action="store_true")


def _common(p):
    p.add_argument("--out", default="run", help="run directory")
    p.add_argument("--workers", type=int, default=1, help="recorded; execution is single process")


def build_parser():
    parser = _Parser(prog="gigaqbx", description="QBX layer potentials with a QBX-aware FMM.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-mesh", help="generate a surface mesh")
    _geometry_arg(p)
    _common(p)

    p = sub.add_parser("refine", help="run the refinement pipeline")
    _pipeline_args(p)
    _common(p)

    p = sub.add_parser("associate", help="associate on-surface targets to centers")
    _pipeline_args(p)
    _common(p)

    for name, hlp in (("fmm-eval", "accelerated evaluation"), ("direct-eval", "unaccelerated QBX")):
        p = sub.add_parser(name, help=f"{hlp} of the Green's identity layer potentials")
        _pipeline_args(p)
        _fmm_args(p)
        p.add_argument("--charge", type=float, nargs=3, default=(3.0, 1.0, 2.0))
        _common(p)

    p = sub.add_parser("green-test", help="Green's identity residual")
    _pipeline_args(p)
    _fmm_args(p)
    p.add_argument("--charge", type=float, nargs=3, default=(3.0, 1.0, 2.0))
    p.add_argument("--engine", choices=("direct", "fmm", "both"), default="both")
    _common(p)

    p = sub.add_parser("translation-test", help="translation error constants")
    p.add_argument("--kind", choices=("m2p", "l2p", "m2l"), required=True)
    p.add_argument("--full", action="store_true", help="orders up to 20 instead of 10")
    _common(p)

    p = sub.add_parser("scaling", help="modeled-cost scaling study")
    p.add_argument("--geometries", default="urchin:2,urchin:3")
    p.add_argument("--norms", default="l2,linf")
    p.add_argument("--nmax-values", default="512")
    p.add_argument("--pqbx", type=int, default=5)
    p.add_argument("--pfmm", type=int, default=15)
    p.add_argument("--tcf", type=float, default=0.9)
    p.add_argument("--quad-order", type=int, default=21)
    p.add_argument("--mesh-order", type=int, default=4)
    p.add_argument("--urchin-tol", type=float, default=1e-4)
    _common(p)

    p = sub.add_parser("cost-compare", help="l2 versus linf target confinement cost")
    p.add_argument("--geometry", default="urchin:2")
    p.add_argument("--pqbx", type=int, default=5)
    p.add_argument("--pfmm", type=int, default=15)
    p.add_argument("--tcf", type=float, default=0.9)
    p.add_argument("--nmax", type=int, default=512)
    p.add_argument("--quad-order", type=int, default=21)
    p.add_argument("--mesh-order", type=int, default=4)
    p.add_argument("--urchin-tol", type=float, default=1e-4)
    _common(p)
    return parser


# {{{ helpers

def _load_disc(args):
    from .experiments.scaling import parse_geometry
    from .mesh.io import load_mesh
    if args.mesh:
        return load_mesh(args.mesh)
    return parse_geometry(args.geometry, args.mesh_order, args.urchin_tol)


def _refine_cfg(args):
    from .refinement import RefinementConfig
    return RefinementConfig(eps_d=args.eps_d, c_kappa=args.c_kappa, eps_ta=args.eps_ta)


def _fmm_cfg(args):
    from .fmm import FmmConfig
    return FmmConfig(p_fmm=args.pfmm, p_qbx=args.pqbx, t_f=args.tcf, n_max=args.nmax,
                     demote_threshold=None if args.no_demote else "auto",
                     allow_low_fmm_order=True)


def _path(args, name):
    return os.path.join(args.out, name)


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=_jsonable)
    return path


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")

# }}}


# {{{ commands

def cmd_gen_mesh(args):
    from .mesh.io import save_mesh, write_element_diagnostics
    disc = _load_disc(args)
    out = [_path(args, "mesh.gqbx"), _path(args, "elements.csv")]
    save_mesh(out[0], disc)
    write_element_diagnostics(out[1], disc)
    return 0, f"gen-mesh: {disc.nelements} elements, order {disc.order}", out, {}


def cmd_refine(args):
    from .mesh.io import save_mesh
    from .refinement import run_pipeline
    res = run_pipeline(_load_disc(args), args.quad_order, _refine_cfg(args))
    out = [_path(args, "stage1.gqbx"), _path(args, "stage2.gqbx"), _path(args, "report.json")]
    save_mesh(out[0], res.stage1)
    save_mesh(out[1], res.stage2)
    with open(out[2], "w") as f:
        f.write(res.report.to_json())
    c = res.report.counts
    return 0, (f"refine: stage1 {c['stage1_elements']} elements, stage2 {c['stage2_elements']} "
               f"elements, {c['centers']} centers"), out, {}


def cmd_associate(args):
    from .refinement import associate_surface, run_pipeline, surface_targets
    res = run_pipeline(_load_disc(args), args.quad_order, _refine_cfg(args))
    tg, side = surface_targets(res)
    a = associate_surface(res, tg, side, args.eps_ta)
    path = _path(args, "association.csv")
    with open(path, "w") as f:
        f.write("target,side_pref,endangered,center,distance\n")
        for i in range(tg.shape[0]):
            f.write(f"{i},{side[i]},{int(a.endangered[i])},{a.center[i]},{a.distance[i]!r}\n")
    code = THRESHOLD_FAILURE if a.flagged.size else 0
    return code, (f"associate: {a.associated.size}/{tg.shape[0]} targets associated, "
                  f"{a.flagged.size} flagged"), [path], {"flagged": int(a.flagged.size)}


def _green(args):
    from .experiments.green import green_setup
    return green_setup(_load_disc(args), args.quad_order, _refine_cfg(args))


def _eval(args, engine):
    from .experiments.green import layer_values, residual_from_values
    from .fmm.io import write_ledger, write_potentials
    setup = _green(args)
    charge = tuple(args.charge)
    out = []
    extra = {}
    if engine == "fmm":
        from .experiments.green import green_density
        from .fmm import execute
        res = execute(setup.bundle, green_density(setup.bundle, charge), _fmm_cfg(args))
        vals = res.potential
        out.append(write_ledger(_path(args, "ledger.json"), res.ledger))
        extra["modeled_flops"] = res.ledger.total
    else:
        vals = layer_values(setup, args.pqbx, charge=charge, engine="direct")
    out += list(write_potentials(_path(args, "potentials"), setup.targets, vals))
    extra["residual"] = residual_from_values(setup, vals, charge)
    return vals, out, extra


def cmd_fmm_eval(args):
    _, out, extra = _eval(args, "fmm")
    return 0, f"fmm-eval: residual {extra['residual']:.3e}, modeled flops {extra['modeled_flops']:.3e}", out, extra


def cmd_direct_eval(args):
    _, out, extra = _eval(args, "direct")
    return 0, f"direct-eval: residual {extra['residual']:.3e}", out, extra


def cmd_green_test(args):
    from .experiments.green import green_density, layer_values, residual_from_values
    from .fmm import execute
    setup = _green(args)
    charge = tuple(args.charge)
    res = {}
    if args.engine in ("direct", "both"):
        res["direct"] = residual_from_values(setup, layer_values(setup, args.pqbx, charge=charge), charge)
    if args.engine in ("fmm", "both"):
        r = execute(setup.bundle, green_density(setup.bundle, charge), _fmm_cfg(args))
        res["fmm"] = residual_from_values(setup, r.potential, charge)
    code = 0
    bound = 0.75 ** (args.pfmm + 1)
    if "direct" in res and "fmm" in res and res["fmm"] > res["direct"] + bound:
        code = THRESHOLD_FAILURE
    path = _path(args, "green.csv")
    with open(path, "w") as f:
        f.write("geometry,p_qbx,p_fmm,engine,residual\n")
        for eng, v in res.items():
            f.write(f"{args.geometry},{args.pqbx},{args.pfmm},{eng},{v!r}\n")
    summary = "green-test: " + ", ".join(f"{k} residual {v:.3e}" for k, v in res.items())
    return code, summary, [path], {"residuals": res, "fmm_allowance": bound}


def cmd_translation_test(args):
    from .experiments.translation import TranslationExperimentGrid, run_translation_experiment
    grid = TranslationExperimentGrid() if args.full else TranslationExperimentGrid.reduced()
    r = run_translation_experiment(args.kind, grid)
    path = _path(args, f"translation_{args.kind}.csv")
    with open(path, "w") as f:
        f.write("kind,R,rho,r,p,q,normalized_error\n")
        for row in r.rows():
            f.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                             for k in ("kind", "R", "rho", "r", "p", "q", "normalized_error")) + "\n")
    c = r.c_estimate
    code = 0 if c <= TRANSLATION_C_MAX else THRESHOLD_FAILURE
    return code, f"translation-test {args.kind}: C estimate {c:.6f} over {len(r.tuples)} tuples", [path], {"C": c}


def _scaling_cfg(args):
    from .experiments.scaling import ScalingConfig
    return ScalingConfig(p_fmm=args.pfmm, p_qbx=args.pqbx, t_f=args.tcf, quad_order=args.quad_order,
                         mesh_order=args.mesh_order, urchin_tol=args.urchin_tol)


def cmd_scaling(args):
    from .experiments.scaling import scaling_study, write_csv
    geoms = tuple(g for g in args.geometries.split(",") if g)
    norms = tuple(n for n in args.norms.split(",") if n)
    nmax = tuple(int(v) for v in args.nmax_values.split(",") if v)
    rows = scaling_study(geoms, _scaling_cfg(args), norms, nmax)
    path = _path(args, "scaling.csv")
    write_csv(rows, path)
    code = 0
    checks = {}
    base = [r for r in rows if r["norm"] == norms[0] and r["n_max"] == nmax[0]]
    if len(base) >= 2:
        a, b = base[0], base[-1]
        fr = b["flops_total"] / a["flops_total"]
        pr = b["n_particles"] / a["n_particles"]
        checks["flop_ratio"], checks["particle_ratio"] = fr, pr
        if fr > 2 * pr:
            code = THRESHOLD_FAILURE
    if "l2" in norms and "linf" in norms:
        for g in geoms:
            tot = {r["norm"]: r["flops_total"] for r in rows if r["geometry"] == g and r["n_max"] == nmax[0]}
            checks[f"{g}_l2_le_linf"] = tot["l2"] <= tot["linf"]
            if tot["l2"] > tot["linf"]:
                code = THRESHOLD_FAILURE
    return code, f"scaling: {len(rows)} rows, checks {checks}", [path], checks


def cmd_cost_compare(args):
    from .experiments.scaling import scaling_study
    rows = scaling_study((args.geometry,), _scaling_cfg(args), ("l2", "linf"), (args.nmax,))
    tot = {r["norm"]: r["flops_total"] for r in rows}
    path = _write_json(_path(args, "cost_compare.json"), rows)
    code = 0 if tot["l2"] <= tot["linf"] else THRESHOLD_FAILURE
    red = 1 - tot["l2"] / tot["linf"]
    return code, f"cost-compare {args.geometry}: l2 {tot['l2']:.3e}, linf {tot['linf']:.3e}, reduction {red:.1%}", [path], tot

# }}}


COMMANDS = {
    "gen-mesh": cmd_gen_mesh, "refine": cmd_refine, "associate": cmd_associate,
    "fmm-eval": cmd_fmm_eval, "direct-eval": cmd_direct_eval, "green-test": cmd_green_test,
    "translation-test": cmd_translation_test, "scaling": cmd_scaling, "cost-compare": cmd_cost_compare,
}


def run(argv=None):
    """Execute one subcommand; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("missing subcommand")
    except _UsageError as exc:
        if not argv or str(exc) == "missing subcommand":
            parser.print_help(sys.stderr)
        print(f"gigaqbx: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    os.makedirs(args.out, exist_ok=True)
    try:
        code, summary, outputs, extra = COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"gigaqbx {args.command}: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    config = {k: v for k, v in vars(args).items() if k not in ("command", "out")}
    manifest = {
        "command": args.command, "argv": argv, "config": config, "outputs": sorted(outputs),
        "results": extra, "exit_code": code, "backend": BACKEND, "deterministic": True,
        "version": __version__,
    }
    _write_json(_path(args, "manifest.json"), manifest)
    print(summary)
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
