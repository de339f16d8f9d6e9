"""Test densities on the voxel grid."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Volume
from .geometry import CylinderDomain

KINDS = ("spin_top", "layered_bricks", "delta", "ball", "custom")

# (z, radius) breakpoints of the spin-top silhouette: a cone resting on its
# tip, a short rim, a shoulder and a thin stem on top
SPIN_TOP_PROFILE = ((-1.2, 0.0), (0.2, 0.8), (0.5, 0.8), (0.65, 0.15), (1.3, 0.15))


@dataclass(frozen=True)
class PhantomSpec:
    """What to rasterize.

    ``spin_top`` uses ``profile`` as ``(z, radius)`` breakpoints with
    density ``density``.  ``layered_bricks`` stacks ``layers`` layers of
    ``bricks x bricks`` blocks inside ``|x|, |y| <= half_width`` between
    ``z_range``, densities alternating between ``levels`` in a 3-D
    checkerboard.  ``delta`` puts ``density`` in the voxel nearest
    ``point``.  ``ball`` is centred at ``center`` with radius ``radius`` and
    either a ``cos^2`` (``smooth=True``) or flat profile.  ``custom`` calls
    ``func(x, y, z)``.
    """

    kind: str = "spin_top"
    density: float = 1.0
    profile: tuple = SPIN_TOP_PROFILE
    levels: tuple = (1.0, 2.0)
    layers: int = 4
    bricks: int = 2
    half_width: float = 0.6
    z_range: tuple = (-1.2, 1.2)
    point: tuple = (1.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.7
    smooth: bool = True
    func: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown phantom kind {self.kind!r}; choose from {KINDS}")
        if self.kind == "custom" and not callable(self.func):
            raise ValueError("custom phantoms need a callable func(x, y, z)")

    def describe(self):
        keep = {"spin_top": ("density", "profile"),
                "layered_bricks": ("levels", "layers", "bricks", "half_width", "z_range"),
                "delta": ("density", "point"),
                "ball": ("density", "center", "radius", "smooth"),
                "custom": ()}[self.kind]
        return {"kind": self.kind, **{k: getattr(self, k) for k in keep}}


def _symmetric_axes(vol: Volume):
    """Voxel-centre coordinates that are exactly antisymmetric about the grid centre."""
    out = []
    for o, s, n in zip(vol.origin, vol.spacing, vol.dims):
        c = o + s * (n - 1) / 2
        if abs(c) < 1e-12 * s:
            c = 0.0
        out.append(c + s * (np.arange(n) - (n - 1) / 2))
    return np.meshgrid(*out, indexing="ij")


def make_phantom(spec: PhantomSpec, dims=41, domain: CylinderDomain | None = None,
                 xy_half_width=1.0) -> Volume:
    domain = domain or CylinderDomain()
    vol = Volume.zeros(dims, domain, xy_half_width=xy_half_width)
    x, y, z = _symmetric_axes(vol)
    r = np.hypot(x, y)
    if spec.kind == "spin_top":
        zs, rs = np.array(spec.profile, float).T
        inside = (z >= zs[0]) & (z <= zs[-1]) & (r <= np.interp(z, zs, rs))
        data = np.where(inside, spec.density, 0.0)
    elif spec.kind == "layered_bricks":
        w = spec.half_width
        z0, z1 = spec.z_range
        inside = (np.abs(x) <= w) & (np.abs(y) <= w) & (z >= z0) & (z <= z1)
        nb = spec.bricks
        ix = np.clip(np.floor((x + w) / (2 * w) * nb), 0, nb - 1)
        iy = np.clip(np.floor((y + w) / (2 * w) * nb), 0, nb - 1)
        iz = np.clip(np.floor((z - z0) / (z1 - z0) * spec.layers), 0, spec.layers - 1)
        parity = (ix + iy + iz).astype(int) % 2
        data = np.where(inside, np.asarray(spec.levels, float)[parity], 0.0)
    elif spec.kind == "delta":
        data = np.zeros(vol.dims)
        data[vol.nearest_index(spec.point)] = spec.density
    elif spec.kind == "ball":
        c = spec.center
        rho = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
        shape = np.cos(np.pi * rho / (2 * spec.radius)) ** 2 if spec.smooth else 1.0
        data = np.where(rho < spec.radius, spec.density * shape, 0.0)
    else:
        data = np.asarray(spec.func(x, y, z), dtype=float) * np.ones(vol.dims)
    if spec.kind != "delta" and np.any((r > domain.support_radius) & (data != 0)):
        warnings.warn(f"{spec.kind} phantom extends beyond the support radius "
                      f"{domain.support_radius}", stacklevel=2)
    return vol.like(data)
