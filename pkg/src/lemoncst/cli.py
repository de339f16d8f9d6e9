"""Command-line entry points.

Every subcommand exits 0 on success.  Failures print a one-line JSON object
``{"error": ..., "message": ...}`` on stderr and exit nonzero (2 for usage
errors, 1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as fio
from .data import Axis, LimitedAxes, SeparationAxes, Volume
from .forward import NoiseSpec, Quadrature, add_noise, apply, build_operator
from .geometry import CylinderDomain
from .io import FormatError
from .phantoms import KINDS, PhantomSpec, make_phantom


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text, n=None):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
    return vals


def _point(text):
    return _floats(text, 3)


def _quad(text):
    try:
        return Quadrature.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _domain(args):
    return CylinderDomain(epsilon=args.epsilon, half_height=args.half_height, alpha=args.alpha)


def _axes(args, domain):
    lim = LimitedAxes.default(alpha=domain.alpha, n_h=args.n_h, n_theta=args.n_theta,
                              n_z=args.n_z0)
    if args.mode == "limited":
        return lim
    # each separation slice is a fixed-separation family; a = alpha is included
    return SeparationAxes(lim.h, Axis(domain.alpha / args.n_a, domain.alpha, args.n_a),
                          lim.theta0, lim.z0)


def _grid_of(vol: Volume):
    return Volume(np.zeros(vol.dims, np.float32), vol.origin, vol.spacing)


def _add_geometry(p, dims_default=41):
    p.add_argument("--dims", type=int, default=dims_default, help="voxels per axis")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--half-height", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=2.0)


def _add_sampling(p):
    p.add_argument("--mode", choices=("limited", "full"), default="limited")
    p.add_argument("--n-h", type=int, default=21)
    p.add_argument("--n-theta", type=int, default=41)
    p.add_argument("--n-z0", type=int, default=31)
    p.add_argument("--n-a", type=int, default=4, help="separations in full mode")
    p.add_argument("--quad", type=_quad, default=None,
                   help="fixed NxM (n_phi x n_z) rule; default spaces nodes half a voxel apart")


def cmd_phantom(args):
    spec = PhantomSpec(args.kind, density=args.density, point=args.point, center=args.center,
                       radius=args.radius)
    vol = make_phantom(spec, args.dims, _domain(args))
    fio.write_volume(args.output, vol)
    return {"output": args.output, "dims": vol.dims, "nonzero": int(np.count_nonzero(vol.data))}


def cmd_project(args):
    vol = fio.read_volume(args.volume)
    domain = _domain(args)
    op = build_operator(domain, _axes(args, domain), quad=args.quad, grid=_grid_of(vol),
                        matrix_free=args.matrix_free)
    sino = apply(op, vol)
    fio.write_sinogram(args.output, sino)
    return {"output": args.output, "samples": sino.size, "operator": op.mode}


def cmd_noise(args):
    sino = fio.read_sinogram(args.sinogram)
    out = add_noise(sino, NoiseSpec(args.gamma, args.seed))
    fio.write_sinogram(args.output, out)
    rel = float(np.linalg.norm(out.data - sino.data) / max(np.linalg.norm(sino.data), 1e-300))
    return {"output": args.output, "relative_residual": rel}


def cmd_reconstruct(args):
    from .reconstruction import SolverConfig, reconstruct, relative_error, select_tv_lambda
    from .spectral import spectral_reconstruct

    sino = fio.read_sinogram(args.sinogram)
    domain = _domain(args)
    if args.like:
        grid = _grid_of(fio.read_volume(args.like))
    else:
        grid = Volume.zeros(args.dims, domain, dtype=np.float32)
    truth = fio.read_volume(args.truth) if args.truth else None
    report = {"method": args.method}
    if args.method == "spectral":
        res = spectral_reconstruct(sino, grid, domain)
        vol = res.volume
        report["h_max"] = res.h_max
        if truth is not None:
            keep = ~res.blind & (truth.radius() < 1.0)
            ref = truth.data[keep]
            report["eps_r"] = float(np.linalg.norm(vol.data[keep] - ref) / np.linalg.norm(ref))
            report["eps_r_region"] = "reachable annulus"
    else:
        op = build_operator(domain, sino.axes, grid=grid, quad=args.quad,
                            matrix_free=args.matrix_free)
        cfg = SolverConfig(method=args.method, iterations=args.iterations, m=args.m,
                           m1=args.m1, m2=args.m2, tv_lambda=args.tv_lambda, step=args.step,
                           seed=args.seed)
        report["config"] = cfg.to_dict()
        x_ref = truth.data.ravel() if truth is not None else None
        b = sino.data.ravel()
        if cfg.method == "cgls_tv" and args.tv_search and x_ref is not None:
            lam, out, table = select_tv_lambda(op, b, x_ref, args.tv_search, cfg, grid.dims)
            report.update(tv_lambda=lam, tv_search=table)
        else:
            out = reconstruct(op, b, cfg, grid.dims, x_ref=x_ref)
        vol = grid.like(out.x)
        report["residual_history"] = out.residuals
        if x_ref is not None:
            report["eps_r"] = relative_error(out.x, x_ref)
    fio.write_volume(args.output, vol)
    if args.report:
        fio.write_json(args.report, report)
    return {"output": args.output, **{k: report[k] for k in ("eps_r", "h_max") if k in report}}


def cmd_visibility(args):
    from .microlocal import DirectionBins, visibility_map

    domain = _domain(args)
    vm = visibility_map(domain, _axes(args, domain), DirectionBins(args.n_side), args.dims,
                        args.quad)
    fio.write_volume(args.output, vm.coverage)
    if args.pgm:
        fio.write_pgm(args.pgm, vm.coverage.data[:, :, args.dims // 2], 0.0, 1.0)
    cov = vm.coverage.data
    return {"output": args.output, "bins": vm.bins.size, "min": float(cov.min()),
            "max": float(cov.max())}


def cmd_artifacts(args):
    from .microlocal import artifact_locus

    locus = artifact_locus(np.array(args.point), args.n_theta)
    fio.write_locus(args.output, locus)
    r = locus.xy_radius()
    return {"output": args.output, "points": len(r), "min_radius": float(r.min()),
            "max_radius": float(r.max())}


def cmd_table1(args):
    from .experiments import table1, table1_rows

    out = Path(args.output)
    results, details = table1(dims=args.dims, gammas=tuple(args.gammas),
                              landweber_iterations=args.landweber_iterations,
                              lambdas=tuple(args.lambdas), seed=args.seed,
                              log=lambda d: print(json.dumps(d), file=sys.stderr))
    header, rows = table1_rows(results, tuple(args.gammas))
    fio.write_csv(out / "table1.csv", header, rows)
    fio.write_json(out / "table1.json", {"results": results, "details": details})
    return {"output": str(out / "table1.csv"), "results": results}


def cmd_experiment(args):
    from .experiments import ExperimentConfig, run_experiment
    from .reconstruction import SolverConfig

    doc = fio.read_json(args.config)
    try:
        cfg = ExperimentConfig(
            phantom=PhantomSpec(**{k: tuple(v) if isinstance(v, list) else v
                                   for k, v in doc.get("phantom", {}).items()}),
            method=doc.get("method", "landweber"),
            solver=SolverConfig(**doc.get("solver", {})),
            noise=NoiseSpec(**doc.get("noise", {})),
            domain=CylinderDomain(**doc.get("domain", {})),
            vol_dims=doc.get("vol_dims", 41),
            tv_lambdas=tuple(doc["tv_lambdas"]) if doc.get("tv_lambdas") else None,
            visibility=bool(doc.get("visibility", False)),
            artifact_points=tuple(tuple(p) for p in doc.get("artifact_points", ())),
            output_dir=args.output)
    except TypeError as exc:
        raise FormatError(f"bad experiment config: {exc}") from exc
    report = run_experiment(cfg)
    return {"output": args.output, "eps_r": report.get("eps_r")}


def cmd_selftest(args):
    from .selftest import run_selftest

    results = run_selftest()
    failed = [r for r in results if not r["passed"]]
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: {r['detail']}")
    if failed:
        raise RuntimeError(f"{len(failed)} self-test check(s) failed")
    return {"checks": len(results), "failed": 0}


def build_parser():
    p = _Parser(prog="lemoncst", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("phantom", help="rasterize a test density")
    _add_geometry(s)
    s.add_argument("--kind", choices=KINDS[:-1], default="spin_top")
    s.add_argument("--density", type=float, default=1.0)
    s.add_argument("--point", type=_point, default=(1.0, 0.0, 0.0))
    s.add_argument("--center", type=_point, default=(0.0, 0.0, 0.0))
    s.add_argument("--radius", type=float, default=0.7)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("project", help="lemon integrals of a volume")
    _add_geometry(s)
    _add_sampling(s)
    s.add_argument("--volume", required=True)
    s.add_argument("--matrix-free", action="store_true")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("noise", help="add relative Gaussian noise to a sinogram")
    s.add_argument("--sinogram", required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_noise)

    s = sub.add_parser("reconstruct", help="invert a sinogram")
    _add_geometry(s)
    s.add_argument("--sinogram", required=True)
    s.add_argument("--method", choices=("landweber", "nncgls", "cgls-tv", "spectral"),
                   default="landweber")
    s.add_argument("--like", help="volume file whose grid the result uses")
    s.add_argument("--truth", help="reference volume for eps_r")
    s.add_argument("--iterations", type=int, default=200)
    s.add_argument("--m", type=int, default=10)
    s.add_argument("--m1", type=int, default=20)
    s.add_argument("--m2", type=int, default=1)
    s.add_argument("--tv-lambda", type=float, default=0.0)
    s.add_argument("--tv-search", type=_floats, default=None,
                   help="comma-separated TV weights to search (needs --truth)")
    s.add_argument("--step", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--quad", type=_quad, default=None)
    s.add_argument("--matrix-free", action="store_true")
    s.add_argument("--report", help="JSON report path")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("visibility", help="per-voxel detectable direction fraction")
    _add_geometry(s, dims_default=21)
    _add_sampling(s)
    s.add_argument("--n-side", type=int, default=16, help="bins are 2 * n_side^2")
    s.add_argument("--pgm", help="also export the central z slice as PGM")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_visibility)

    s = sub.add_parser("artifacts", help="reflection locus of a point")
    s.add_argument("--point", type=_point, required=True)
    s.add_argument("--n-theta", type=int, default=360)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_artifacts)

    s = sub.add_parser("table1", help="noise sweep for both phantoms and methods")
    s.add_argument("--dims", type=int, default=41)
    s.add_argument("--gammas", type=_floats, default=(0.001, 0.01, 0.05))
    s.add_argument("--lambdas", type=_floats, default=(0.003, 0.01, 0.03, 0.1, 0.3))
    s.add_argument("--landweber-iterations", type=int, default=300)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser("experiment", help="run a JSON-configured experiment")
    s.add_argument("--config", required=True)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("selftest", help="quick invariant checks")
    s.set_defaults(func=cmd_selftest)
    return p


def _fail(kind, message, code, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    t0 = time.time()
    try:
        summary = args.func(args)
    except (FormatError, FileNotFoundError) as exc:
        return _fail("usage", str(exc), 2)
    except Exception as exc:
        stage = getattr(exc, "stage", args.command)
        return _fail(type(exc).__name__, str(exc), 1, stage=stage)
    summary["seconds"] = round(time.time() - t0, 3)
    print(json.dumps(summary, default=fio._jsonable))
    return 0
