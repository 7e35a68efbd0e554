"""Command line front end: ``robustshape <subcommand> [--config FILE] ...``.

Errors are reported as one JSON line on stderr and mapped to the exit code of
the exception class (see :mod:`robustshape.errors`).
"""
import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from . import fem
from .errors import RobustShapeError
from .functionals import dirichlet_energy, gamma_distance, worstcase_energy
from .io import export_field, format_config, read_config, read_field, write_run_log
from .optimize import check_gradient, optimize, shape_centroid, volume
from .problem import ProblemSpec
from .radial import symmetrization_check
from .state import solve_worstcase_state

THREADS_ENV = "ROBUSTSHAPE_THREADS"
SUBCOMMANDS = ("solve", "optimize", "evaluate", "check-grad", "radial", "gamma-dist")


def _threads():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise RobustShapeError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise RobustShapeError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _load_spec(args) -> ProblemSpec:
    spec = read_config(args.config) if args.config else ProblemSpec()
    changes = {}
    if args.delta is not None:
        changes["delta"] = args.delta
    if args.out is not None:
        changes["output_dir"] = args.out
    return dataclasses.replace(spec, **changes) if changes else spec


def _potential(spec, mesh, path):
    if path is None:
        return np.zeros(mesh.n_nodes)
    V = read_field(mesh, path)
    if np.any(V < 0):
        raise RobustShapeError(f"{path}: potential must be nonnegative")
    return V


def _emit(args, **values):
    if args.quiet:
        return
    for key, val in values.items():
        print(f"{key} = {val:.10g}" if isinstance(val, float) else f"{key} = {val}")


def _export_all(mesh, outdir, name, values):
    for fmt in ("csv", "vtk", "pgm"):
        export_field(mesh, values, fmt, os.path.join(outdir, f"{name}.{fmt}"), name=name)


def cmd_solve(spec, args):
    mesh = spec.mesh()
    V = _potential(spec, mesh, args.potential)
    sol = solve_worstcase_state(mesh, V, spec.source_field(mesh), spec.delta, spec.p, spec.state)
    os.makedirs(spec.output_dir, exist_ok=True)
    _export_all(mesh, spec.output_dir, "u", sol.u)
    report = {"iterations": sol.iterations, "converged": sol.converged,
              "residual": sol.residual, "max_u": float(sol.u.max())}
    with open(os.path.join(spec.output_dir, "state.json"), "w") as fh:
        json.dump(report, fh, indent=1)
    _emit(args, **report)
    return 0 if sol.converged else 3


def cmd_optimize(spec, args):
    mesh = spec.mesh()
    res = optimize(spec)
    os.makedirs(spec.output_dir, exist_ok=True)
    _export_all(mesh, spec.output_dir, "V_opt", res.V_opt)
    _export_all(mesh, spec.output_dir, "u_opt", res.u_opt)
    note = "objective is -int f u + delta ||u||_2 (delta term included)"
    write_run_log(os.path.join(spec.output_dir, "run.log"), spec, res, note=note)
    cx, cy = shape_centroid(mesh, res.V_opt)
    _emit(args, objective=res.objective, volume=volume(mesh, res.V_opt, spec.optimization.alpha),
          iterations=res.iterations, reason=res.reason, centroid_x=cx, centroid_y=cy)
    return 0


def cmd_evaluate(spec, args):
    mesh = spec.mesh()
    V = _potential(spec, mesh, args.potential)
    f = spec.source_field(mesh)
    energy = dirichlet_energy(mesh, V, f)
    wc = worstcase_energy(mesh, V, f, spec.delta, spec.p, spec.state)
    out = {"energy": energy, "worstcase_energy": wc.value, "quadratic": wc.quadratic,
           "potential_term": wc.potential, "linear_term": wc.linear, "norm_term": wc.norm,
           "volume": volume(mesh, V, spec.optimization.alpha)}
    if spec.p == 2:
        out["objective"] = -wc.linear + wc.norm
    _emit(args, **out)
    return 0


def cmd_check_grad(spec, args):
    mesh = spec.mesh()
    rng = np.random.default_rng(spec.seed)
    if args.potential:
        V = _potential(spec, mesh, args.potential)
    else:
        v0 = np.log(mesh.domain.area / spec.optimization.m) / spec.optimization.alpha
        V = rng.uniform(0.0, 2.0 * v0, mesh.n_nodes)
    chk = check_gradient(mesh, V, spec.source_field(mesh), spec.delta, rng=spec.seed)
    _emit(args, nodes=chk.nodes.size, max_relative_error=chk.max_relative_error)
    return 0 if chk.max_relative_error <= 1e-3 else 1


def cmd_radial(spec, args):
    src = spec.source
    if src.kind == "constant":
        f_r = src.value
    elif src.kind == "radial":
        f_r = lambda r: np.maximum(src.value - src.slope * r, 0.0)  # noqa: E731
    else:
        raise RobustShapeError("radial check needs a constant or radial source")
    rows = symmetrization_check(spec.optimization.m, f_r, spec.delta, spec.p, nx=spec.nx,
                                cfg=spec.state, workers=_threads())
    if not args.quiet:
        print("candidate,energy,discrete_area,ball_energy,relative_gap,passes")
        for r in rows:
            print(f"{r.name},{r.energy:.9g},{r.discrete_area:.6g},{r.ball_energy:.9g},"
                  f"{r.relative_gap:.4g},{r.passes}")
    return 0 if all(r.passes for r in rows) else 1


def cmd_gamma_dist(spec, args):
    mesh = spec.mesh()
    V1 = _potential(spec, mesh, args.files[0])
    V2 = _potential(spec, mesh, args.files[1])
    _emit(args, gamma_distance=gamma_distance(mesh, V1, V2))
    return 0


_COMMANDS = {
    "solve": cmd_solve,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "check-grad": cmd_check_grad,
    "radial": cmd_radial,
    "gamma-dist": cmd_gamma_dist,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="robustshape", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="problem config file (defaults: unit-square benchmark)")
    common.add_argument("--out", help="output directory (overrides [run] output_dir)")
    common.add_argument("--delta", type=float, help="override the perturbation size")
    common.add_argument("--quiet", action="store_true", help="suppress normal output")
    common.add_argument("--echo", action="store_true", help="print the resolved config first")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("solve", "evaluate", "check-grad"):
            p.add_argument("--potential", help="CSV potential field (x,y,value); default V = 0")
        if name == "gamma-dist":
            p.add_argument("files", nargs=2, metavar="V_CSV")
    return parser


def _fail(exc, code):
    line = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    print(json.dumps(line), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = _load_spec(args)
        if args.echo and not args.quiet:
            print(format_config(spec))
        return _COMMANDS[args.command](spec, args)
    except RobustShapeError as exc:
        return _fail(exc, exc.exit_code)
    except (ValueError, OSError) as exc:
        return _fail(exc, 2)


if __name__ == "__main__":
    sys.exit(main())
