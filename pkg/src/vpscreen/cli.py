"""Command-line front end: ``vpscreen <subcommand> scenario.json``.

Exit codes: 0 success, 1 failed condition or assertion, 2 usage or parameter
error, 3 non-convergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConvergenceError, ParameterError, VPScreenError
from .gtransform import verify_conditions
from .nonuniqueness import charge_neutrality, compare, difference_field, negative_set
from .reconstruct import PhaseSpaceSampler
from .scenario import Scenario

log = logging.getLogger("vpscreen")

EXIT_OK, EXIT_FAIL, EXIT_PARAM, EXIT_NOCONV = 0, 1, 2, 3


def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _provenance(sc, reports=()):
    mesh = {"radial": {"r_max": sc.radial[0], "n": sc.radial[1]}} if sc.is_radial else {
        "grid": {"L": sc.grid[0], "n": sc.grid[1]}}
    return {
        "versions": {"vpscreen": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "mesh": mesh,
        "solver": {k: getattr(sc.solver, k) for k in sc.solver.__dataclass_fields__},
        "gtable": sc.gtable,
        "conditions": [r.to_dict() for r in reports],
    }


def _prepare(sc, out):
    """Build the extension and g-table, write the condition report, return (gt, report)."""
    gt = sc.build_gtransform(sc.extension())
    report = verify_conditions(gt)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "conditions.json", report.to_dict())
    gt.write_csv(out / "gtable.csv")
    return gt, report


def cmd_gcheck(args, sc):
    out = sc.output_dir()
    _, report = _prepare(sc, out)
    for res in report.results:
        flag = "ok" if res.passed else "FAIL"
        print(f"{res.name:16s} {flag:4s} worst r={res.worst_r:.6g} value={res.worst_value:.6g}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _solve(sc, out):
    gt, report = _prepare(sc, out)
    if not report.passed:
        failed = [r.name for r in report.results if not r.passed]
        print(f"conditions failed: {', '.join(failed)}", file=sys.stderr)
        return None, EXIT_FAIL
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            sol = sc.solve_with(gt)
    except ConvergenceError as exc:
        np.savetxt(out / "residual_history.csv", np.asarray(exc.history), header="update_sup_norm",
                   fmt="%.17g")
        raise
    for w in caught:
        log.warning("%s", w.message)
    summary = sol.summary()
    summary["charge_neutrality_defect"] = charge_neutrality(sol)
    summary["negative_volume_fraction"] = negative_set(sol)
    summary["provenance"] = _provenance(sc, [report])
    sol.field("Q").to_csv(out / "Q.csv")
    sol.field("R").to_csv(out / "R.csv")
    _dump(out / "solution.json", summary)
    return sol, EXIT_OK


def cmd_solve(args, sc):
    if sc.is_radial:
        raise ParameterError("scenario has a radial mesh; use the 'radial' subcommand")
    sol, code = _solve(sc, sc.output_dir())
    if sol is not None:
        print(f"converged in {sol.iterations} iterations; Q in [{sol.Q.min():.6g}, {sol.Q.max():.6g}]")
    return code


def cmd_radial(args, sc):
    if not sc.is_radial:
        raise ParameterError("scenario has no 'radial' section")
    sol, code = _solve(sc, sc.output_dir())
    if sol is not None:
        print(f"converged in {sol.iterations} iterations; Q in [{sol.Q.min():.6g}, {sol.Q.max():.6g}]")
    return code


def cmd_sample(args, sc):
    out = sc.output_dir()
    sol, code = _solve(sc, out)
    if sol is None:
        return code
    sampler = PhaseSpaceSampler(sol)
    xs = np.asarray(args.point or [[1.0, 0.0, 0.0]], dtype=float)
    vs = np.asarray(args.velocity or [[0.0, 0.0, 0.0]], dtype=float)
    rows = []
    for x in xs:
        for v in vs:
            rows.append([*x, *v, float(sampler.eval_f(x, v)[0])])
    np.savetxt(out / "samples.csv", np.asarray(rows), delimiter=",", fmt="%.17g",
               header="x,y,z,vx,vy,vz,f", comments="")
    result = {"samples": len(rows)}
    if not sol.is_radial:
        dev = [sampler.boundary_deviation(v) for v in vs]
        result["boundary_deviation"] = [{"velocity": v.tolist(), "deviation": d, "bound": b}
                                        for v, (d, b) in zip(vs, dev)]
    _dump(out / "samples.json", result)
    print(f"wrote {len(rows)} samples")
    return EXIT_OK


def cmd_density(args, sc):
    if sc.is_radial:
        raise ParameterError("density planes need a 3D grid")
    out = sc.output_dir()
    sol, code = _solve(sc, out)
    if sol is None:
        return code
    grid = sol.mesh
    k = int(np.argmin(np.abs(grid.coords - args.z)))
    rho = sol.gtransform(sol.Q[:, :, k])
    X, Y = np.meshgrid(grid.coords, grid.coords, indexing="ij")
    np.savetxt(out / "density_plane.csv", np.column_stack([X.ravel(), Y.ravel(), rho.ravel()]),
               delimiter=",", fmt="%.17g", header=f"z={grid.coords[k]!r}\nx,y,rho", comments="")
    if args.check:
        # deterministic stride through the plane
        idx = np.linspace(0, rho.size - 1, args.check).astype(int)
        sampler = PhaseSpaceSampler(sol)
        moment, table = sampler.density_from_Q(sol.Q[:, :, k].ravel()[idx])
        print(f"velocity quadrature vs g-table: max diff {np.max(np.abs(moment - table)):.3e}")
    print(f"wrote density plane at z={grid.coords[k]:.6g}")
    return EXIT_OK


def cmd_compare(args, sc):
    out = sc.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    report, sol1, sol2 = compare(args.beta1, args.beta2, sc)
    _dump(out / "comparison.json", {**report.to_dict(), "provenance": _provenance(sc)})
    difference_field(sol1, sol2).to_csv(out / "Q_difference.csv")
    if report.degenerate:
        print("degenerate comparison: identical extensions")
    print(f"q_diff_l2={report.q_diff_l2:.6e} (threshold {report.q_diff_threshold:.3e}); "
          f"f_diff_lower_bound={report.f_diff_lower_bound:.6e}")
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="vpscreen", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("gcheck", cmd_gcheck, "build the g-table and check its conditions"),
        ("solve", cmd_solve, "solve on the 3D periodic grid"),
        ("radial", cmd_radial, "solve the radially symmetric problem"),
        ("sample", cmd_sample, "evaluate f at phase-space points"),
        ("density", cmd_density, "write the spatial density on a z-plane"),
        ("compare", cmd_compare, "compare solutions for two extensions"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("scenario", type=Path)
        sp.set_defaults(func=fn)
        if name == "sample":
            sp.add_argument("--point", nargs=3, type=float, action="append", metavar=("X", "Y", "Z"))
            sp.add_argument("--velocity", nargs=3, type=float, action="append", metavar=("VX", "VY", "VZ"))
        elif name == "density":
            sp.add_argument("--z", type=float, default=0.0)
            sp.add_argument("--check", type=int, default=0, help="verify this many plane nodes by quadrature")
        elif name == "compare":
            sp.add_argument("beta1", type=float)
            sp.add_argument("beta2", type=float)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = Scenario.load(args.scenario)
        return args.func(args, sc)
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except ConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except VPScreenError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
