"""Edge visibility and reflection artifacts of the lemon transforms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .data import LimitedAxes, Volume
from .forward import Quadrature, _grid_args
from .geometry import CylinderDomain, DomainError, LemonParams, defining_function


def lemon_normal(params: LemonParams, point, tol=1e-8, apex_tol=1e-9) -> np.ndarray:
    """Unit normal (gradient direction of the defining function) at a lemon point."""
    x = np.asarray(point, dtype=float)
    psi = defining_function(params, x)
    if np.any(np.abs(psi) > tol * params.p**2):
        raise DomainError("point is not on the lemon")
    c = params.axis_xy
    dx, dy = x[..., 0] - c[0], x[..., 1] - c[1]
    g = np.hypot(dx, dy)
    if np.any(g < apex_tol):
        raise DomainError("the normal is undefined at the apexes")
    s = (g + params.R) / g
    n = np.stack([s * dx, s * dy, x[..., 2] - params.z0], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


@dataclass(frozen=True)
class DirectionBins:
    """Equal-area partition of the unit sphere into ``2 * n_side**2`` cells."""

    n_side: int = 16

    @property
    def size(self) -> int:
        return 2 * self.n_side**2

    def index(self, directions) -> np.ndarray:
        d = np.asarray(directions, dtype=float)
        d = d / np.linalg.norm(d, axis=-1, keepdims=True)
        x, y, z = d[..., 0], d[..., 1], d[..., 2]
        r = np.sqrt(np.maximum(0.0, 1.0 - np.abs(z)))
        v = r * np.arctan2(np.abs(y), np.abs(x)) / (0.5 * np.pi)
        u = np.where(x < 0, -(r - v), r - v)
        v = np.where(y < 0, -v, v)
        n = self.n_side
        ia = np.clip(((u + v + 1.0) * 0.5 * n).astype(int), 0, n - 1)
        ib = np.clip(((u - v + 1.0) * 0.5 * n).astype(int), 0, n - 1)
        return ((z < 0).astype(int) * n + ia) * n + ib

    def pole_bins(self):
        """Bins holding ``+z`` and ``-z``."""
        return tuple(int(b) for b in self.index(np.array([[0, 0, 1.0], [0, 0, -1.0]])))


@dataclass
class VisibilityMap:
    """Per-voxel fraction of direction bins hit by some lemon normal.

    ``occupied[i, b]`` is true when direction bin ``b`` is normal to a data
    lemon at voxel ``i`` (flattened C order); ``xi`` and ``-xi`` are always
    marked together.
    """

    coverage: Volume
    occupied: np.ndarray
    bins: DirectionBins

    def bin_occupancy(self, b) -> np.ndarray:
        return self.occupied[:, b].reshape(self.coverage.dims)


def visibility_map(domain: CylinderDomain | None = None, sino_axes=None,
                   sphere: DirectionBins = DirectionBins(), vol_dims=21,
                   quad: Quadrature | None = None) -> VisibilityMap:
    """Bin the normals of every quadrature node at its nearest voxel.

    Only nodes inside the open unit cylinder are counted.
    """
    domain = domain or CylinderDomain()
    sino_axes = sino_axes if sino_axes is not None else LimitedAxes.default(alpha=domain.alpha)
    grid = Volume.zeros(vol_dims, domain)
    if quad is None:
        quad = Quadrature.adaptive(0.5 * min(grid.spacing))
    n_vox = int(np.prod(grid.dims))
    occ = np.zeros((n_vox, sphere.size), dtype=np.bool_)
    table = sino_axes.lemon_table()
    if table[0].size:
        K.visibility_rows(*table, *_grid_args((grid.origin, grid.spacing, grid.dims), quad),
                          occ, sphere.n_side)
    cov = occ.sum(axis=1) / sphere.size
    return VisibilityMap(grid.like(cov.reshape(grid.dims)), occ, sphere)


def reflect_tangent_plane(x, theta0) -> np.ndarray:
    """Mirror ``x`` in the plane tangent to the unit cylinder at angle ``theta0``.

    Broadcasts over ``theta0``; the trailing axis of the result holds xyz.
    """
    x = np.asarray(x, dtype=float)
    th = np.asarray(theta0, dtype=float)[..., None]
    normal = np.concatenate([np.cos(th), np.sin(th), np.zeros_like(th)], axis=-1)
    d = np.sum(normal[..., :2] * x[..., :2], axis=-1, keepdims=True) - 1.0
    return x - 2.0 * d * normal


@dataclass
class ArtifactLocus:
    source: np.ndarray
    theta0: np.ndarray
    points: np.ndarray

    def xy_radius(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])


def artifact_locus(x, n_theta=360) -> ArtifactLocus:
    """Reflections of ``x`` in all planes tangent to the unit cylinder.

    ``x`` must lie in the closed unit cylinder.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError("point must have three coordinates")
    if np.hypot(x[0], x[1]) > 1.0 + 1e-12:
        raise DomainError(f"point {tuple(x.tolist())} lies outside the unit cylinder")
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    return ArtifactLocus(x, th, reflect_tangent_plane(x, th))


def distance_to_polyline(points, polyline, closed=True) -> np.ndarray:
    """Euclidean distance from each point to a piecewise-linear curve."""
    pts = np.atleast_2d(np.asarray(points, float))
    a = np.asarray(polyline, float)
    b = np.roll(a, -1, axis=0) if closed else a[1:]
    a = a if closed else a[:-1]
    ab = b - a
    den = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    t = np.clip(np.einsum("pij,ij->pi", pts[:, None, :] - a[None], ab) / den, 0.0, 1.0)
    proj = a[None] + t[..., None] * ab[None]
    return np.min(np.linalg.norm(pts[:, None, :] - proj, axis=2), axis=1)
