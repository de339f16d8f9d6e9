"""Experiment orchestration: simulate, reconstruct, score and record."""
from __future__ import annotations

import hashlib
import json
import os
import platform
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
import scipy.sparse as sp
from scipy.ndimage import maximum_filter

from . import __version__
from . import io as fio
from .data import LimitedAxes, Sinogram, Volume
from .forward import (ForwardOperator, NoiseSpec, Quadrature, add_noise, apply,
                      build_operator)
from .geometry import CylinderDomain
from .microlocal import artifact_locus, distance_to_polyline, visibility_map
from .phantoms import PhantomSpec, make_phantom
from .reconstruction import (SolverConfig, landweber, reconstruct, relative_error,
                             select_tv_lambda)
from .spectral import spectral_reconstruct

TABLE1_GAMMAS = (0.001, 0.01, 0.05)
TABLE1_PHANTOMS = ("spin_top", "layered_bricks")
LANDWEBER_MAX_ITERATIONS = 300
TV_LAMBDAS = (0.003, 0.01, 0.03, 0.1, 0.3)


class ExperimentError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def cache_dir() -> Path:
    return Path(os.environ.get("LEMONCST_CACHE", Path.home() / ".cache" / "lemoncst"))


def cached_operator(domain: CylinderDomain | None = None, axes=None, vol_dims=41,
                    quad: Quadrature | None = None, xy_half_width=1.0,
                    use_cache=True) -> ForwardOperator:
    """``build_operator`` backed by an on-disk cache of assembled matrices."""
    domain = domain or CylinderDomain()
    axes = axes if axes is not None else LimitedAxes.default(alpha=domain.alpha)
    grid = Volume.zeros(vol_dims, domain, xy_half_width=xy_half_width)
    q = quad or Quadrature.adaptive(0.5 * min(grid.spacing))
    key = json.dumps({"domain": asdict(domain), "axes": axes.descriptor(), "dims": grid.dims,
                      "quad": q.describe(), "w": xy_half_width, "v": __version__},
                     sort_keys=True, default=fio._jsonable)
    path = cache_dir() / f"op-{hashlib.sha256(key.encode()).hexdigest()[:20]}.npz"
    geometry = (grid.origin, grid.spacing, grid.dims)
    if use_cache and path.exists():
        return ForwardOperator(axes, geometry, q, sp.load_npz(path).tocsr())
    op = build_operator(domain, axes, vol_dims, q, xy_half_width=xy_half_width)
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz")
        os.close(fd)
        sp.save_npz(tmp, op.matrix, compressed=False)
        os.replace(tmp, path)
    return op


@dataclass
class ExperimentConfig:
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    method: str = "landweber"
    solver: SolverConfig = field(default_factory=SolverConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    domain: CylinderDomain = field(default_factory=CylinderDomain)
    vol_dims: int | tuple = 41
    xy_half_width: float = 1.0
    axes: object = None
    tv_lambdas: tuple | None = None
    visibility: bool = False
    artifact_points: tuple = ()
    output_dir: str | None = None

    def to_dict(self):
        axes = self.axes if self.axes is not None else LimitedAxes.default(self.domain.alpha)
        return {"phantom": self.phantom.describe(), "method": self.method,
                "solver": self.solver.to_dict(), "noise": asdict(self.noise),
                "domain": asdict(self.domain), "vol_dims": self.vol_dims,
                "xy_half_width": self.xy_half_width, "axes": axes.descriptor(),
                "tv_lambdas": self.tv_lambdas, "visibility": self.visibility,
                "artifact_points": [list(p) for p in self.artifact_points]}


def environment():
    import numba

    return {"lemoncst": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def run_experiment(config: ExperimentConfig, op: ForwardOperator | None = None):
    """Phantom, forward projection, noise, reconstruction and scoring.

    Outputs go to ``config.output_dir`` (if set) together with
    ``manifest.json``; they appear only once every stage has succeeded.
    """
    stage = "setup"
    staging = None
    t0 = time.time()
    try:
        if config.output_dir is not None:
            out = Path(config.output_dir)
            if out.exists() and any(out.iterdir()):
                raise ExperimentError(stage, f"output directory {out} is not empty")
            out.parent.mkdir(parents=True, exist_ok=True)
            staging = Path(tempfile.mkdtemp(dir=out.parent, prefix=f".{out.name}."))
        stage = "phantom"
        truth = make_phantom(config.phantom, config.vol_dims, config.domain,
                             config.xy_half_width)
        stage = "operator"
        axes = config.axes if config.axes is not None else LimitedAxes.default(config.domain.alpha)
        if op is None:
            op = cached_operator(config.domain, axes, config.vol_dims,
                                 xy_half_width=config.xy_half_width)
        stage = "forward"
        clean = apply(op, truth)
        stage = "noise"
        sino = add_noise(clean, config.noise)
        stage = "reconstruct"
        report = {"method": config.method, "config": config.to_dict()}
        report.update(_reconstruct(config, op, sino, truth))
        recon = report.pop("volume")
        extra = {}
        if config.visibility:
            stage = "visibility"
            extra["visibility"] = visibility_map(config.domain, axes, vol_dims=config.vol_dims)
        loci = []
        if config.artifact_points:
            stage = "artifacts"
            loci = [artifact_locus(p) for p in config.artifact_points]
        report["runtime_s"] = time.time() - t0
        if staging is not None:
            stage = "write"
            _write_outputs(staging, truth, sino, recon, report, extra, loci, config)
            if out.exists():
                out.rmdir()
            os.replace(staging, out)
            staging = None
        report["volume"] = recon
        return report
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(stage, f"{type(exc).__name__}: {exc}") from exc
    finally:
        if staging is not None:
            shutil.rmtree(staging, ignore_errors=True)


def _reconstruct(config, op, sino, truth):
    x_ref = truth.data.ravel()
    if config.method == "spectral":
        res = spectral_reconstruct(sino, op.template(), config.domain)
        keep = ~res.blind & (truth.radius() < 1.0)
        ref = truth.data[keep]
        eps = float(np.linalg.norm(res.volume.data[keep] - ref) / np.linalg.norm(ref))
        return {"volume": res.volume, "eps_r": eps, "eps_r_region": "reachable annulus",
                "h_max": res.h_max, "residual_history": [], "modes": res.modes}
    solver = SolverConfig(**{**config.solver.to_dict(), "method": config.method})
    shape = tuple(op.vol_dims)
    if solver.method == "cgls_tv" and config.tv_lambdas:
        lam, out, table = select_tv_lambda(op, sino.data.ravel(), x_ref, config.tv_lambdas,
                                           solver, shape)
        extra = {"tv_lambda": lam, "tv_search": table}
    else:
        out = reconstruct(op, sino.data.ravel(), solver, shape, x_ref=x_ref)
        extra = {}
    return {"volume": truth.like(out.x.reshape(shape)), "eps_r": relative_error(out.x, x_ref),
            "residual_history": out.residuals, "best_iteration": out.best_iteration,
            "breakdown": out.breakdown, **extra}


def _write_outputs(d: Path, truth, sino, recon, report, extra, loci, config):
    fio.write_volume(d / "phantom.raw", truth)
    fio.write_sinogram(d / "sinogram.raw", sino)
    fio.write_volume(d / "reconstruction.raw", recon)
    mid = recon.dims[2] // 2
    fio.write_pgm(d / "reconstruction_z0.pgm", recon.data[:, :, mid])
    fio.write_pgm(d / "phantom_z0.pgm", truth.data[:, :, mid])
    if "modes" in report:
        fio.write_modes(d / "modes.raw", report.pop("modes"))
    if "visibility" in extra:
        fio.write_volume(d / "visibility.raw", extra["visibility"].coverage)
    for i, locus in enumerate(loci):
        fio.write_locus(d / f"artifact_locus_{i}.csv", locus)
    fio.write_json(d / "report.json", report)
    fio.write_json(d / "manifest.json", {
        "config": config.to_dict(), "environment": environment(),
        "files": sorted(p.name for p in d.iterdir()) + ["manifest.json"],
        "created": time.strftime("%Y-%m-%dT%H:%M:%S")})


def table1(dims=41, gammas=TABLE1_GAMMAS, phantoms=TABLE1_PHANTOMS,
           landweber_iterations=LANDWEBER_MAX_ITERATIONS, lambdas=TV_LAMBDAS, seed=0,
           op: ForwardOperator | None = None, log=None):
    """Relative errors of Landweber and CGLS-TV over phantoms and noise levels.

    Landweber reports its best iterate up to ``landweber_iterations`` and
    CGLS-TV its best TV weight from ``lambdas``, both scored against the
    phantom.  Returns ``{phantom: {method: {gamma: eps_r}}}`` plus details.
    """
    op = op or cached_operator(vol_dims=dims)
    results, details = {}, []
    for kind in phantoms:
        truth = make_phantom(PhantomSpec(kind), dims)
        x_ref = truth.data.ravel()
        clean = apply(op, truth)
        results[kind] = {"landweber": {}, "cgls_tv": {}}
        for g in gammas:
            b = add_noise(clean, NoiseSpec(g, seed)).data.ravel()
            lw = landweber(op, b, SolverConfig(iterations=landweber_iterations), x_ref=x_ref)
            eps_lw = min(lw.errors)
            lam, out, table = select_tv_lambda(op, b, x_ref, lambdas,
                                               SolverConfig(method="cgls_tv"), truth.dims)
            eps_tv = relative_error(out.x, x_ref)
            results[kind]["landweber"][g] = eps_lw
            results[kind]["cgls_tv"][g] = eps_tv
            details.append({"phantom": kind, "gamma": g, "landweber_eps_r": eps_lw,
                            "landweber_iteration": lw.best_iteration, "cgls_tv_eps_r": eps_tv,
                            "tv_lambda": lam, "tv_search": table})
            if log:
                log(details[-1])
    return results, details


def table1_rows(results, gammas=TABLE1_GAMMAS):
    rows = []
    for kind, methods in results.items():
        for method, vals in methods.items():
            rows.append([kind, method] + [f"{vals[g]:.4f}" for g in gammas])
    return ["phantom", "method"] + [f"gamma={g}" for g in gammas], rows


# the delta sits on a voxel centre and the grid reaches past the artifact curve
BOLKER_XY_HALF_WIDTH = 41 / 12
BOLKER_DOMAIN = CylinderDomain(half_height=25 / 12)
BOLKER_DIMS = (41, 41, 25)


def bolker_experiment(iterations=100, threshold=0.2, tolerance_voxels=1.5, n_theta=3600,
                      op: ForwardOperator | None = None):
    """Landweber reconstruction of a point mass at ``(1, 0, 0)`` from exact data.

    Local maxima outside the unit cylinder above ``threshold`` times the
    global maximum are compared with the reflection locus of the point.
    """
    op = op or cached_operator(BOLKER_DOMAIN, vol_dims=BOLKER_DIMS,
                               xy_half_width=BOLKER_XY_HALF_WIDTH)
    truth = make_phantom(PhantomSpec("delta", point=(1.0, 0.0, 0.0)), BOLKER_DIMS,
                         BOLKER_DOMAIN, BOLKER_XY_HALF_WIDTH)
    b = apply(op, truth).data
    rec = landweber(op, b, SolverConfig(iterations=iterations)).x.reshape(truth.dims)
    vol = truth.like(rec)
    peak = rec.max()
    is_max = (rec == maximum_filter(rec, size=3, mode="constant", cval=-np.inf))
    outside = vol.radius() >= 1.0
    sel = is_max & outside & (rec > threshold * peak)
    pts = vol.coordinates()[sel]
    locus = artifact_locus(np.array([1.0, 0.0, 0.0]), n_theta)
    spacing = max(vol.spacing)
    dist = distance_to_polyline(pts, locus.points) if len(pts) else np.zeros(0)
    near = dist <= tolerance_voxels * spacing
    return {"volume": vol, "maxima": pts, "values": rec[sel], "distances": dist,
            "fraction_near": float(near.mean()) if len(pts) else float("nan"),
            "n_maxima": int(len(pts)), "locus": locus,
            "locus_inside_open_cylinder": int(np.sum(locus.xy_radius() < 1.0 - 1e-12)),
            "spacing": spacing}
