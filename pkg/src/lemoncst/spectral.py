"""Fourier-Volterra inversion of the fixed-separation lemon transform.

For a density written in scanner cylinder coordinates, a Fourier transform
in ``z`` and a Fourier series in ``theta`` turn the transform into a family
of Volterra equations of the first kind, one per mode ``(n, eta)``:

    g_n(h, eta) = int_0^h Kt_n(eta; h, u) f_n(1 - u, eta) du,

with ``u = 1 - r`` the depth below the cylinder wall and ``Kt_n = 4 K_n``.
The kernel ``K_n`` is a v-integral with an inverse square-root weight at both
ends, evaluated here by Gauss-Chebyshev quadrature.  Each equation is
discretized by product integration with piecewise-constant ``f`` on cells
``[h_{j-1}, h_j]`` and solved by forward substitution.

Only heights ``h < 1`` lead to a Volterra equation, so radii below
``1 - h_max`` are never reached; that core is zero-filled and flagged.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_triangular

from .data import Axis, Sinogram, Volume
from .geometry import CylinderDomain, DomainError, p_of_h, r_of_h


@dataclass
class ModeProfile:
    """One Fourier mode sampled along the radial direction.

    ``kind == "g"`` holds data modes at heights ``grid = h``; ``kind == "f"``
    holds density modes at depths ``grid = u`` (cell midpoints).
    """

    n: int
    eta: float
    grid: np.ndarray
    values: np.ndarray
    kind: str = "g"

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have matching shapes")


@lru_cache(maxsize=8)
def _cheb_nodes(n_nodes):
    x = np.cos((2 * np.arange(1, n_nodes + 1) - 1) * np.pi / (2 * n_nodes))
    return 0.5 * (1 + x)


def _kernel_parts(h, u, alpha, n_nodes):
    """Mode-independent pieces of the v-integrand, broadcast over ``(h, u)``.

    Returns the weight (including ``2(1-u) pi / N``), the axial offset
    ``z`` entering ``cos(eta z)`` and ``arccos`` of the Chebyshev argument.
    Trailing axis runs over the Gauss-Chebyshev nodes.
    """
    h = np.asarray(h, float)[..., None]
    u = np.asarray(u, float)[..., None]
    p = p_of_h(h, alpha)
    R = r_of_h(h, alpha)
    v = _cheb_nodes(n_nodes)
    t = u + v * (h - u)
    # h - t = (1 - v)(h - u) avoids cancellation near the diagonal
    z = np.sqrt((1 - v) * (h - u) * (p + t + R))
    c = ((1 - u) ** 2 + 1 - t**2) / (2 * (1 - u))
    w = (2 * (1 - u) * np.pi / n_nodes) * t * p / (
        np.sqrt(p + t + R) * np.sqrt(t + u) * np.sqrt(2 + t - u) * np.sqrt(2 - t - u))
    return w, z, np.arccos(np.clip(c, -1.0, 1.0))


def kernel_diagonal(h, alpha=2.0):
    """Closed form ``K_n(eta; h, h) = pi sqrt(p(h) h (1 - h)) / 2``."""
    h = np.asarray(h, float)
    return np.pi * np.sqrt(p_of_h(h, alpha) * h * (1 - h)) / 2


def kernel_eval(n, eta, h, u, n_nodes=64, alpha=2.0, epsilon=0.0, kappa=0.0):
    """``K_n(eta; p(h), R(h), u)`` for ``epsilon <= u <= h <= 1 - kappa``.

    The kernel is real: it depends on ``n`` only through ``T_|n|`` and on
    ``eta`` only through ``cos(eta z)``.  The diagonal ``u == h`` goes
    through the same quadrature; there the integrand reduces to a constant
    times the Chebyshev weight, so the rule is exact.
    """
    if not (0.0 < u and epsilon <= u <= h <= 1.0 - kappa and h < 1.0):
        raise DomainError(f"(h={h}, u={u}) lies outside the kernel triangle")
    w, z, acos_c = _kernel_parts(h, u, alpha, n_nodes)
    return float(np.sum(w * np.cos(eta * z) * np.cos(abs(n) * acos_c)))


class _ProductRule:
    """Gauss-Legendre nodes of every (collocation height, cell) pair with the
    mode-independent kernel pieces, reused across modes."""

    def __init__(self, h, alpha, n_nodes, n_gl):
        self.h = np.asarray(h, float)
        self.edges = np.concatenate([[0.0], self.h])
        m = self.h.size
        xg, wg = np.polynomial.legendre.leggauss(n_gl)
        ii, jj = np.tril_indices(m)
        lo, hi = self.edges[jj], self.edges[jj + 1]
        u = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * xg
        self.du = 0.5 * (hi - lo)[:, None] * wg
        self.rows, self.cols, self.m = ii, jj, m
        self.w, self.z, self.acos_c = _kernel_parts(self.h[ii][:, None], u, alpha, n_nodes)

    def matrix(self, n, eta):
        vals = np.einsum("pqk,pqk->pq", self.w * np.cos(eta * self.z),
                         np.cos(abs(n) * self.acos_c))
        M = np.zeros((self.m, self.m))
        M[self.rows, self.cols] = 4.0 * np.sum(vals * self.du, axis=1)
        return M


@dataclass
class KernelTable:
    """Product-integration matrix of ``Kt_n(eta; h, u) = 4 K_n`` for one mode.

    ``matrix[i, j]`` integrates ``Kt_n(eta; h_i, u)`` over the cell
    ``[edges[j], edges[j+1]]``; ``edges = [0, h_0, h_1, ...]``.
    """

    n: int
    eta: float
    h: np.ndarray
    matrix: np.ndarray
    alpha: float = 2.0
    n_nodes: int = 64

    @classmethod
    def build(cls, n, eta, h, alpha=2.0, n_nodes=64, n_gl=8, rule=None):
        rule = rule or _ProductRule(h, alpha, n_nodes, n_gl)
        return cls(int(n), float(eta), rule.h, rule.matrix(n, eta), alpha, n_nodes)

    @property
    def edges(self):
        return np.concatenate([[0.0], self.h])

    @property
    def midpoints(self):
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def diagonal(self):
        """Closed-form ``Kt_n(eta; h_i, h_i)``."""
        return 4.0 * kernel_diagonal(self.h, self.alpha)


def forward_modes(f: ModeProfile, K: KernelTable) -> ModeProfile:
    """Discrete forward map of the Volterra equation (product integration)."""
    return ModeProfile(f.n, f.eta, K.h, K.matrix @ f.values, kind="g")


def volterra_solve(g: ModeProfile, K: KernelTable, pivot_tol=1e-10) -> ModeProfile:
    """Recover the density mode from a data mode by forward substitution."""
    if g.values.shape != K.h.shape or not np.allclose(g.grid, K.h, rtol=0, atol=1e-12):
        raise ValueError("data mode is not sampled on the kernel table's heights")
    diag = np.abs(np.diag(K.matrix))
    if diag.min() < pivot_tol * max(diag.max(), 1e-300):
        cond = np.linalg.cond(K.matrix)
        warnings.warn(f"ill-conditioned Volterra system (condition estimate {cond:.3g}); "
                      "heights approach the cylinder axis", RuntimeWarning, stacklevel=2)
    f = solve_triangular(K.matrix, g.values, lower=True)
    return ModeProfile(g.n, g.eta, K.midpoints, f, kind="f")


@dataclass
class ModeSet:
    """All modes of a sinogram or density, ``values[radial, n, eta]``.

    ``n`` follows ``fftfreq`` order over the ``theta0`` samples and ``eta``
    is the angular frequency of the zero-padded ``z0`` transform.  The
    ``z0`` axis metadata is kept so that resynthesis lands on the same
    sample positions.
    """

    kind: str
    grid: np.ndarray
    n: np.ndarray
    eta: np.ndarray
    values: np.ndarray
    z_axis: Axis
    n_pad: int
    present: np.ndarray = field(default=None)
    stable: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.present is None:
            self.present = np.ones(self.values.shape[1:], dtype=bool)
        if self.stable is None:
            self.stable = self.present.copy()

    def __iter__(self):
        for a, n in enumerate(self.n):
            for b, eta in enumerate(self.eta):
                if self.present[a, b]:
                    yield ModeProfile(int(n), float(eta), self.grid, self.values[:, a, b],
                                      self.kind)

    def __len__(self):
        return int(self.present.sum())

    def energy(self):
        """``sum |values|^2`` rescaled so it equals the squared sample norm."""
        dz = self.z_axis.step
        return float(np.sum(np.abs(self.values) ** 2) * self.n.size / (self.n_pad * dz**2))


def _require_uniform_periodic(axis: Axis):
    n = axis.num
    if n < 1 or abs(axis.start) > 1e-12 or abs(axis.stop - 2 * np.pi * (n - 1) / n) > 1e-9:
        raise ValueError("theta0 must be sampled uniformly over [0, 2 pi) without the endpoint")


def decompose(sino: Sinogram, pad_factor=2) -> ModeSet:
    """Fourier series in ``theta0`` and zero-padded Fourier transform in ``z0``.

    ``g_n = (1/N_theta) sum_l g(theta_l) exp(-i n theta_l)`` and
    ``g(eta) = dz sum_k g(z_k) exp(-i eta (z_k - z_0))``; the phase
    reference is the first ``z0`` sample.
    """
    axes = sino.axes
    if getattr(axes, "mode", None) != "limited":
        raise ValueError("spectral decomposition needs fixed-separation (h, theta0, z0) data")
    _require_uniform_periodic(axes.theta0)
    nz = axes.z0.num
    if nz < 2:
        raise ValueError("need at least two z0 samples")
    dz = axes.z0.step
    n_pad = 1 << int(np.ceil(np.log2(pad_factor * nz)))
    data = np.asarray(sino.data, float)
    g = np.fft.fft(data, axis=1) / axes.theta0.num
    g = np.fft.fft(g, n=n_pad, axis=2) * dz
    n = np.rint(np.fft.fftfreq(axes.theta0.num) * axes.theta0.num).astype(int)
    eta = 2 * np.pi * np.fft.fftfreq(n_pad, dz)
    return ModeSet("g", axes.h.values, n, eta, g, axes.z0, n_pad)


def solve_modes(gset: ModeSet, alpha=2.0, h_max=None, n_nodes=64, n_gl=8, cond_max=None):
    """Volterra solve for every mode with heights ``h <= h_max``.

    With ``cond_max`` set, modes whose discrete system has a larger condition
    number are set to zero instead of solved; ``stable`` on the result
    records which modes were kept.
    """
    keep = gset.grid <= (h_max if h_max is not None else np.inf) + 1e-12
    keep &= gset.grid < 1.0
    if not keep.any():
        raise DomainError("no heights below the cylinder radius")
    h = gset.grid[keep]
    rule = _ProductRule(h, alpha, n_nodes, n_gl)
    out = np.zeros((h.size,) + gset.values.shape[1:], dtype=complex)
    stable = np.zeros(gset.values.shape[1:], dtype=bool)
    # K depends on |n| and |eta| only
    cache = {}
    for a, n in enumerate(gset.n):
        for b, eta in enumerate(gset.eta):
            if not gset.present[a, b]:
                continue
            key = (abs(int(n)), round(abs(float(eta)), 12))
            if key not in cache:
                M = KernelTable.build(n, eta, h, alpha, n_nodes, rule=rule).matrix
                ok = cond_max is None or np.linalg.cond(M) <= cond_max
                cache[key] = M if ok else None
            M = cache[key]
            if M is not None:
                out[:, a, b] = solve_triangular(M, gset.values[keep, a, b], lower=True)
                stable[a, b] = True
    mid = 0.5 * (rule.edges[1:] + rule.edges[:-1])
    return ModeSet("f", mid, gset.n, gset.eta, out, gset.z_axis, gset.n_pad,
                   gset.present.copy(), stable)


def polar_samples(fset: ModeSet):
    """Inverse transforms of density modes: ``F[j, l, k]`` at ``r_j = 1 - u_j``,
    ``theta_l`` and the original ``z0`` sample heights.  Returns ``(F, imag)``
    with ``imag`` the largest discarded imaginary part."""
    if not fset.present.all():
        warnings.warn(f"{(~fset.present).sum()} missing modes treated as zero", stacklevel=2)
    vals = np.where(fset.present[None], fset.values, 0.0)
    dz = fset.z_axis.step
    F = np.fft.ifft(vals, axis=2)[:, :, : fset.z_axis.num] / dz
    F = np.fft.ifft(F, axis=1) * fset.n.size
    return F.real, float(np.abs(F.imag).max(initial=0.0))


def resynthesize(fset: ModeSet, template: Volume, h_max=None):
    """Interpolate density modes onto the voxel grid of ``template``.

    Returns ``(volume, blind)`` where ``blind`` marks voxels closer to the
    scanner axis than ``1 - h_max`` (never reached by the data).  Voxels
    outside the outermost radial sample ``1 - min(u)`` are set to zero.
    """
    F, _ = polar_samples(fset)
    u = fset.grid
    h_max = h_max if h_max is not None else 2 * u[-1] - (u[-2] if u.size > 1 else 0.0)
    r = 1.0 - u[::-1]
    F = F[::-1]
    n_th = fset.n.size
    pad = 3
    th = 2 * np.pi * np.arange(-pad, n_th + pad) / n_th
    F = np.concatenate([F[:, -pad:], F, F[:, :pad]], axis=1)
    z = fset.z_axis.values
    method = "cubic" if min(r.size, z.size) >= 4 else "linear"
    interp = RegularGridInterpolator((r, th, z), F, method=method, bounds_error=False,
                                     fill_value=0.0)
    x, y, zz = np.meshgrid(*template.axes(), indexing="ij")
    rv = np.hypot(x, y)
    tv = np.arctan2(y, x) % (2 * np.pi)
    blind = rv < 1.0 - h_max
    pts = np.stack([np.clip(rv, r[0], None), tv, zz], axis=-1)
    vol = interp(pts.reshape(-1, 3)).reshape(rv.shape)
    vol[blind | (rv > r[-1])] = 0.0
    return template.like(vol), blind


@dataclass
class SpectralResult:
    volume: Volume
    blind: np.ndarray
    h_max: float
    modes: ModeSet
    imag_residue: float


def spectral_reconstruct(sino: Sinogram, template: Volume, domain: CylinderDomain | None = None,
                         kappa=None, n_nodes=64, n_gl=8, pad_factor=2,
                         cond_max=1e3) -> SpectralResult:
    """Invert fixed-separation data mode by mode.

    ``kappa`` (default one height step) keeps ``h <= 1 - kappa`` so that the
    kernel diagonal stays away from zero.  Modes whose discrete Volterra
    system is worse conditioned than ``cond_max`` are dropped (``None``
    keeps every mode).
    """
    domain = domain or CylinderDomain()
    h = sino.axes.h.values
    if kappa is None:
        kappa = float(np.min(np.diff(h))) if h.size > 1 else 0.0
    gset = decompose(sino, pad_factor)
    fset = solve_modes(gset, sino.axes.alpha, 1.0 - kappa, n_nodes, n_gl, cond_max)
    h_max = float(gset.grid[gset.grid <= 1.0 - kappa + 1e-12].max())
    _, imag = polar_samples(fset)
    vol, blind = resynthesize(fset, template, h_max)
    return SpectralResult(vol, blind, h_max, fset, imag)
