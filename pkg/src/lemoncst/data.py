"""Volumes, sinogram sampling grids and their containers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CylinderDomain, DomainError, p_of_h, r_of_h


@dataclass
class Volume:
    """Scalar density on a regular voxel grid.

    ``data`` is indexed ``[ix, iy, iz]``; ``origin`` is the centre of voxel
    ``(0, 0, 0)`` and ``spacing`` the voxel size along each axis.
    """

    data: np.ndarray
    origin: tuple
    spacing: tuple

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise ValueError("volume data must be 3-D")
        self.origin = tuple(float(v) for v in self.origin)
        self.spacing = tuple(float(v) for v in self.spacing)

    @classmethod
    def zeros(cls, dims, domain: CylinderDomain | None = None, xy_half_width=1.0, dtype=float):
        """Cell-centred grid covering ``[-w, w]^2 x [-H, H]``."""
        domain = domain or CylinderDomain()
        dims = _dims3(dims)
        lo = np.array([-xy_half_width, -xy_half_width, -domain.half_height])
        hi = -lo
        spacing = (hi - lo) / np.array(dims)
        origin = lo + spacing / 2
        return cls(np.zeros(dims, dtype=dtype), tuple(origin), tuple(spacing))

    def like(self, data) -> "Volume":
        return Volume(np.asarray(data).reshape(self.dims), self.origin, self.spacing)

    @property
    def dims(self):
        return self.data.shape

    def axes(self):
        return [o + s * np.arange(n) for o, s, n in zip(self.origin, self.spacing, self.dims)]

    def coordinates(self):
        """Voxel-centre coordinates, shape ``dims + (3,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def radius(self):
        x, y, _ = np.meshgrid(*self.axes(), indexing="ij")
        return np.hypot(x, y)

    def nearest_index(self, point):
        idx = np.rint((np.asarray(point, float) - self.origin) / self.spacing).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.array(self.dims)):
            raise DomainError(f"point {point} lies outside the grid")
        return tuple(idx)


def _dims3(dims):
    if np.isscalar(dims):
        dims = (int(dims),) * 3
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    return dims


@dataclass(frozen=True)
class Axis:
    """Uniform sample axis ``linspace(start, stop, num)``."""

    start: float
    stop: float
    num: int

    @classmethod
    def periodic(cls, num, period=2 * np.pi):
        """Half-open axis over ``[0, period)`` with no duplicated endpoint."""
        return cls(0.0, period * (num - 1) / num, int(num))

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.num - 1) if self.num > 1 else 0.0

    def descriptor(self):
        return [self.start, self.stop, self.num]


@dataclass(frozen=True)
class LimitedAxes:
    """Sampling of the fixed-separation transform over ``(h, theta0, z0)``."""

    h: Axis
    theta0: Axis
    z0: Axis
    alpha: float = 2.0
    mode: str = field(default="limited", init=False)

    @classmethod
    def default(cls, alpha=2.0, n_h=21, n_theta=41, n_z=31, z_range=3.0):
        """``n_h x n_theta x n_z`` samples over ``(0, alpha] x [0, 2 pi) x [-z_range, z_range]``."""
        return cls(Axis(alpha / n_h, alpha, n_h), Axis.periodic(n_theta),
                   Axis(-z_range, z_range, n_z), alpha)

    @property
    def shape(self):
        return (self.h.num, self.theta0.num, self.z0.num)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def lemon_table(self):
        """Per-row ``(p, R, theta0, z0, valid)`` arrays in C order of ``shape``."""
        h, th, z = np.meshgrid(self.h.values, self.theta0.values, self.z0.values, indexing="ij")
        h = h.ravel()
        valid = (h > 0) & (h <= self.alpha * (1 + 1e-12))
        hs = np.where(valid, h, self.alpha)
        return p_of_h(hs, self.alpha), r_of_h(hs, self.alpha), th.ravel(), z.ravel(), valid

    def descriptor(self):
        return {"mode": self.mode, "alpha": self.alpha, "h": self.h.descriptor(),
                "theta0": self.theta0.descriptor(), "z0": self.z0.descriptor()}


@dataclass(frozen=True)
class FullAxes:
    """Sampling of the general transform over ``(p, R, theta0, z0)``; pairs with p <= R are void."""

    p: Axis
    R: Axis
    theta0: Axis
    z0: Axis
    mode: str = field(default="full", init=False)

    @property
    def shape(self):
        return (self.p.num, self.R.num, self.theta0.num, self.z0.num)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def lemon_table(self):
        p, R, th, z = np.meshgrid(self.p.values, self.R.values, self.theta0.values,
                                  self.z0.values, indexing="ij")
        p, R = p.ravel(), R.ravel()
        valid = (p > R) & (R >= 0)
        return p, np.where(valid, R, 0.0), th.ravel(), z.ravel(), valid

    def descriptor(self):
        return {"mode": self.mode, "p": self.p.descriptor(), "R": self.R.descriptor(),
                "theta0": self.theta0.descriptor(), "z0": self.z0.descriptor()}


@dataclass(frozen=True)
class SeparationAxes:
    """General transform sampled over ``(h, a, theta0, z0)``.

    ``a`` is half the source-detector separation, so each ``a`` slice is a
    fixed-separation family and ``p = (a^2 + h^2) / 2h``, ``R = p - h``.
    Samples with ``h > a`` are void.
    """

    h: Axis
    a: Axis
    theta0: Axis
    z0: Axis
    mode: str = field(default="separation", init=False)

    @property
    def shape(self):
        return (self.h.num, self.a.num, self.theta0.num, self.z0.num)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def lemon_table(self):
        h, a, th, z = np.meshgrid(self.h.values, self.a.values, self.theta0.values,
                                  self.z0.values, indexing="ij")
        h, a = h.ravel(), a.ravel()
        valid = (h > 0) & (h <= a * (1 + 1e-12))
        hs = np.where(valid, h, a)
        return p_of_h(hs, a), r_of_h(hs, a), th.ravel(), z.ravel(), valid

    def descriptor(self):
        return {"mode": self.mode, "h": self.h.descriptor(), "a": self.a.descriptor(),
                "theta0": self.theta0.descriptor(), "z0": self.z0.descriptor()}


def axes_from_descriptor(desc):
    ax = {k: Axis(float(v[0]), float(v[1]), int(v[2])) for k, v in desc.items()
          if isinstance(v, list)}
    mode = desc.get("mode", "limited")
    if mode == "limited":
        return LimitedAxes(ax["h"], ax["theta0"], ax["z0"], float(desc.get("alpha", 2.0)))
    if mode == "separation":
        return SeparationAxes(ax["h"], ax["a"], ax["theta0"], ax["z0"])
    return FullAxes(ax["p"], ax["R"], ax["theta0"], ax["z0"])


@dataclass
class Sinogram:
    axes: LimitedAxes | FullAxes | SeparationAxes
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data).reshape(self.axes.shape)

    @property
    def size(self):
        return self.data.size
