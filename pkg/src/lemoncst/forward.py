"""Discrete lemon transforms: quadrature, system matrix and noise."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from . import _kernels as K
from .data import LimitedAxes, Sinogram, Volume
from .geometry import CylinderDomain, LemonParams


@dataclass(frozen=True)
class Quadrature:
    """Node layout on each lemon.

    With ``node_spacing`` unset the rule is the midpoint rule on a uniform
    ``n_z x n_phi`` grid over the whole lemon.  With ``node_spacing`` set,
    nodes are laid out about that far apart in arc length and only the part
    of the lemon that can reach the voxel grid is visited.
    """

    n_phi: int = 128
    n_z: int = 128
    node_spacing: float | None = None

    def __post_init__(self):
        if self.n_phi < 1 or self.n_z < 1:
            raise ValueError("node counts must be positive")
        if self.node_spacing is not None and not self.node_spacing > 0:
            raise ValueError("node_spacing must be positive")

    @classmethod
    def adaptive(cls, node_spacing: float) -> "Quadrature":
        return cls(node_spacing=float(node_spacing))

    @classmethod
    def parse(cls, text: str) -> "Quadrature":
        """``"NxM"`` means ``n_phi=N, n_z=M``."""
        try:
            n_phi, n_z = (int(v) for v in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"quadrature must look like 128x128, got {text!r}") from None
        return cls(n_phi, n_z)

    @property
    def is_adaptive(self) -> bool:
        return self.node_spacing is not None

    def describe(self):
        if self.is_adaptive:
            return {"rule": "arc-adaptive", "node_spacing": self.node_spacing}
        return {"rule": "midpoint", "n_phi": self.n_phi, "n_z": self.n_z}


def _grid_args(vol_or_geom, quad: Quadrature):
    origin, spacing, dims = vol_or_geom
    o = np.asarray(origin, float)
    s = np.asarray(spacing, float)
    n = np.asarray(dims, np.int64)
    # window outside which no node can reach a voxel through trilinear weights
    zlo = o[2] - s[2]
    zhi = o[2] + n[2] * s[2]
    xm = max(abs(o[0]), abs(o[0] + (n[0] - 1) * s[0])) + s[0]
    ym = max(abs(o[1]), abs(o[1] + (n[1] - 1) * s[1])) + s[1]
    rho = math.hypot(xm, ym)
    qmode = 1 if quad.is_adaptive else 0
    ds = quad.node_spacing if quad.is_adaptive else 1.0
    return (qmode, quad.n_phi, quad.n_z, ds, zlo, zhi, rho, o, s, n)


def _geom(vol: Volume):
    return vol.origin, vol.spacing, vol.dims


def integrate_lemon(vol: Volume, params: LemonParams, quad: Quadrature = Quadrature()) -> float:
    """Quadrature estimate of the integral of ``vol`` over one lemon.

    The volume is trilinearly interpolated and taken to vanish outside its grid.
    """
    args = _grid_args(_geom(vol), quad)
    flat = np.ascontiguousarray(vol.data, dtype=np.float64).ravel()
    out = K.apply_rows(np.array([params.p]), np.array([params.R]), np.array([params.theta0]),
                       np.array([params.z0]), np.ones(1, np.bool_), *args, flat)
    return float(out[0])


class ForwardOperator(LinearOperator):
    """Linear map from flattened volumes to flattened sinograms.

    ``matrix`` holds the assembled CSR matrix in sparse mode and is ``None``
    in matrix-free mode, where rows are recomputed on every apply.
    """

    def __init__(self, axes, geometry, quad: Quadrature, matrix=None):
        self.axes = axes
        self.origin, self.spacing, self.vol_dims = geometry
        self.quadrature = quad
        self.matrix = matrix
        self._table = axes.lemon_table()
        self._args = _grid_args(geometry, quad)
        n_vox = int(np.prod(self.vol_dims))
        super().__init__(dtype=np.float64, shape=(axes.size, n_vox))

    @property
    def mode(self) -> str:
        return "matrix-free" if self.matrix is None else "sparse"

    def _matvec(self, x):
        x = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
        if self.matrix is not None:
            return self.matrix @ x
        return K.apply_rows(*self._table, *self._args, x)

    def _rmatvec(self, y):
        y = np.ascontiguousarray(np.ravel(y), dtype=np.float64)
        if self.matrix is not None:
            return self.matrix.T @ y
        out = np.zeros(self.shape[1])
        K.adjoint_rows(*self._table, *self._args, y, out)
        return out

    def _adjoint(self):
        return _Transposed(self)

    def template(self) -> Volume:
        return Volume(np.zeros(self.vol_dims), self.origin, self.spacing)

    def row(self, i) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix.getrow(i).toarray().ravel()
        e = np.zeros(self.shape[0])
        e[i] = 1.0
        return self._rmatvec(e)


class _Transposed(LinearOperator):
    def __init__(self, op):
        self.op = op
        super().__init__(dtype=op.dtype, shape=(op.shape[1], op.shape[0]))

    def _matvec(self, y):
        return self.op._rmatvec(y)

    def _rmatvec(self, x):
        return self.op._matvec(x)


def estimate_nnz(axes, geometry, quad: Quadrature, n_sample=96, seed=0) -> int:
    """Predicted nonzero count from a random sample of rows."""
    P, R, TH, Z0, valid = axes.lemon_table()
    rows = np.flatnonzero(valid)
    if rows.size == 0:
        return 0
    rng = np.random.default_rng(seed)
    pick = rng.choice(rows, size=min(n_sample, rows.size), replace=False)
    counts = K.count_row_nnz(P[pick], R[pick], TH[pick], Z0[pick], valid[pick],
                             *_grid_args(geometry, quad))
    return int(math.ceil(counts.mean() * rows.size))


def build_operator(domain: CylinderDomain | None = None, sino_axes=None, vol_dims=41,
                   quad: Quadrature | None = None, *, matrix_free=False, max_nnz=2.5e8,
                   dtype=np.float64, xy_half_width=1.0, grid: Volume | None = None,
                   block_rows=1024) -> ForwardOperator:
    """Discretize the lemon transform for ``sino_axes`` on a voxel grid.

    The grid is ``grid`` when given, else ``vol_dims`` voxels over
    ``[-w, w]^2 x [-H, H]``.  The default quadrature spaces nodes half a
    voxel apart.  Assembly is refused when the predicted number of nonzeros
    exceeds ``max_nnz``.
    """
    domain = domain or CylinderDomain()
    sino_axes = sino_axes if sino_axes is not None else LimitedAxes.default(alpha=domain.alpha)
    if grid is None:
        grid = Volume.zeros(vol_dims, domain, xy_half_width=xy_half_width, dtype=np.float32)
    geometry = _geom(grid)
    if quad is None:
        quad = Quadrature.adaptive(0.5 * min(grid.spacing))
    if matrix_free:
        return ForwardOperator(sino_axes, geometry, quad)

    predicted = estimate_nnz(sino_axes, geometry, quad)
    if predicted > max_nnz:
        raise MemoryError(f"predicted {predicted:.3g} nonzeros exceeds the cap {max_nnz:.3g}; "
                          "use matrix_free=True")
    P, R, TH, Z0, valid = sino_axes.lemon_table()
    args = _grid_args(geometry, quad)
    m = P.size
    indptr = np.zeros(m + 1, np.int64)
    # overshoot a little so the common case never reallocates
    cap = int(predicted * 1.05) + 1024
    indices = np.empty(cap, np.int32)
    data = np.empty(cap, dtype)
    nnz = 0
    for start in range(0, m, block_rows):
        sl = slice(start, min(start + block_rows, m))
        ip, ind, dat = K.assemble_rows(P[sl], R[sl], TH[sl], Z0[sl], valid[sl], *args,
                                       int(predicted / m * (sl.stop - sl.start) * 1.2) + 64)
        if nnz + ind.size > indices.size:
            grow = max(int(indices.size * 1.25), nnz + ind.size)
            indices = np.resize(indices, grow)
            data = np.resize(data, grow)
        indices[nnz:nnz + ind.size] = ind
        data[nnz:nnz + ind.size] = dat
        indptr[sl.start + 1:sl.stop + 1] = ip[1:] + nnz
        nnz += ind.size
    indices = indices[:nnz].copy()
    data = data[:nnz].copy()
    matrix = sp.csr_matrix((data, indices, indptr), shape=(m, int(np.prod(grid.dims))))
    return ForwardOperator(sino_axes, geometry, quad, matrix)


def _check_volume(op: ForwardOperator, vol):
    data = vol.data if isinstance(vol, Volume) else np.asarray(vol)
    if data.size != op.shape[1] or (data.ndim == 3 and tuple(data.shape) != tuple(op.vol_dims)):
        raise ValueError(f"volume of shape {data.shape} does not match operator grid "
                         f"{tuple(op.vol_dims)}")
    return data


def apply(op: ForwardOperator, vol) -> Sinogram:
    data = _check_volume(op, vol)
    return Sinogram(op.axes, op.matvec(data.ravel()))


def adjoint(op: ForwardOperator, sino) -> Volume:
    data = sino.data if isinstance(sino, Sinogram) else np.asarray(sino)
    if data.size != op.shape[0]:
        raise ValueError(f"sinogram with {data.size} samples does not match operator "
                         f"with {op.shape[0]} rows")
    return Volume(op.rmatvec(data.ravel()).reshape(op.vol_dims), op.origin, op.spacing)


@dataclass(frozen=True)
class NoiseSpec:
    gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")


def add_noise(sino: Sinogram, spec: NoiseSpec) -> Sinogram:
    """``b + gamma * (||b|| / sqrt(l)) * eta`` with standard normal ``eta``."""
    clean = np.asarray(sino.data, dtype=np.float64)
    if spec.gamma == 0:
        return Sinogram(sino.axes, clean.copy())
    eta = np.random.default_rng(spec.seed).standard_normal(clean.shape)
    scale = spec.gamma * np.linalg.norm(clean) / math.sqrt(clean.size)
    return Sinogram(sino.axes, clean + scale * eta)

