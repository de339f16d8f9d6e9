"""Fast invariant checks runnable from an installed package."""
from __future__ import annotations

import numpy as np

from .data import LimitedAxes, Volume
from .forward import Quadrature, build_operator, integrate_lemon
from .geometry import CylinderDomain, LemonParams, lemon_surface_area
from .microlocal import DirectionBins, reflect_tangent_plane
from .reconstruction import tv_prox
from .spectral import kernel_diagonal, kernel_eval


def _check(name, value, bound):
    return {"name": name, "passed": bool(value <= bound), "detail": f"{value:.3e} <= {bound:.2g}"}


def run_selftest(seed=0):
    rng = np.random.default_rng(seed)
    out = []

    # constant density integrates to the surface area
    dom = CylinderDomain(half_height=5.0)
    vol = Volume(np.ones((9, 9, 41)), (-4.0, -4.0, -5.0), (1.0, 1.0, 0.25))
    lp = LemonParams(2.5, 1.5)
    got = integrate_lemon(vol, lp, Quadrature(256, 256))
    out.append(_check("area", abs(got - lemon_surface_area(lp)) / got, 1e-3))

    # <A x, y> == <x, A^T y>
    axes = LimitedAxes.default(n_h=5, n_theta=8, n_z=5)
    op = build_operator(dom, axes, vol_dims=9, quad=Quadrature(32, 32))
    x = rng.standard_normal(op.shape[1])
    y = rng.standard_normal(op.shape[0])
    lhs, rhs = (op @ x) @ y, x @ (op.T @ y)
    out.append(_check("adjoint", abs(lhs - rhs) / max(abs(lhs), 1e-300), 1e-12))

    # kernel endpoint against its closed form
    k = kernel_eval(0, 0.0, 0.6, 0.6 - 1e-9)
    out.append(_check("kernel diagonal", abs(k - kernel_diagonal(0.6)) / k, 1e-3))

    # TV prox is nonexpansive
    a, b = rng.standard_normal((2, 8, 8, 8))
    d = np.linalg.norm(tv_prox(a, 0.1, 100) - tv_prox(b, 0.1, 100)) / np.linalg.norm(a - b)
    out.append(_check("tv nonexpansive", d - 1.0, 1e-9))

    # reflection across the tangent plane is an involution
    p = np.array([0.3, -0.2, 0.4])
    q = reflect_tangent_plane(reflect_tangent_plane(p, 0.7), 0.7)
    out.append(_check("reflection involution", float(np.abs(q - p).max()), 1e-12))

    # bins cover the sphere evenly
    v = rng.standard_normal((200_000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    bins = DirectionBins(8)
    counts = np.bincount(bins.index(v), minlength=bins.size) / (len(v) / bins.size)
    out.append(_check("equal-area bins", float(np.abs(counts - 1).max()), 0.15))
    return out
