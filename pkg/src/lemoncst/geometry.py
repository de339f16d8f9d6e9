"""Lemon surfaces in the cylindrical scanner.

All lengths are in units of the scanner radius (the cylinder has radius 1).
A lemon is the surface of revolution of a circular arc of radius ``p`` about
its chord.  The chord (the lemon axis) is the vertical line through
``(cos theta0, sin theta0)`` and the centre of the arc sits a distance ``R``
on the far side of the axis, so at height ``z`` (relative to ``z0``) the
surface lies a distance ``t = sqrt(p**2 - z**2) - R`` from the axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ELECTRON_REST_ENERGY_KEV = 511.0


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class CylinderDomain:
    """Scanner geometry.

    ``epsilon`` is the radial offset of the reconstruction support
    ``C_eps = {r <= 1 - epsilon}``; ``alpha`` is half the source-detector
    separation of the limited transform; the volume spans
    ``[-half_height, half_height]`` in z.
    """

    epsilon: float = 0.05
    half_height: float = 2.0
    alpha: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.alpha <= 0.0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if self.half_height < self.alpha:
            raise DomainError("half_height must be at least alpha")

    @property
    def support_radius(self) -> float:
        return 1.0 - self.epsilon


@dataclass(frozen=True)
class LemonParams:
    p: float
    R: float
    theta0: float = 0.0
    z0: float = 0.0

    def __post_init__(self):
        if not (self.p > self.R >= 0.0):
            raise DomainError(f"need p > R >= 0, got p={self.p}, R={self.R}")
        object.__setattr__(self, "theta0", float(self.theta0) % (2 * np.pi))

    @property
    def half_extent(self) -> float:
        """Half-length ``a = sqrt(p^2 - R^2)`` of the lemon along its axis."""
        return float(np.sqrt(self.p**2 - self.R**2))

    @property
    def height(self) -> float:
        """Equatorial distance ``h = p - R`` from the axis."""
        return self.p - self.R

    @property
    def axis_xy(self) -> np.ndarray:
        return np.array([np.cos(self.theta0), np.sin(self.theta0)])

    @property
    def apexes(self) -> np.ndarray:
        a = self.half_extent
        c = self.axis_xy
        return np.array([[c[0], c[1], self.z0 - a], [c[0], c[1], self.z0 + a]])


@dataclass(frozen=True)
class LimitedLemonParams:
    """Lemon of the fixed-separation family, indexed by its height ``h``."""

    h: float
    theta0: float = 0.0
    z0: float = 0.0

    def s(self, alpha: float) -> float:
        """Level ``s = -2R = (h^2 - alpha^2)/h`` of the limited defining function."""
        return (self.h**2 - alpha**2) / self.h


def p_of_h(h, alpha):
    h = np.asarray(h, dtype=float)
    return (alpha**2 + h**2) / (2.0 * h)


def r_of_h(h, alpha):
    h = np.asarray(h, dtype=float)
    return (alpha**2 - h**2) / (2.0 * h)


def limited_to_full(lp: LimitedLemonParams, alpha: float) -> LemonParams:
    if not 0.0 < lp.h <= alpha:
        raise DomainError(f"h must lie in (0, alpha={alpha}], got {lp.h}")
    p = float(p_of_h(lp.h, alpha))
    # R = p - h loses no accuracy here and keeps p - R == h exact
    return LemonParams(p=p, R=float(r_of_h(lp.h, alpha)), theta0=lp.theta0, z0=lp.z0)


def energy_to_angle(E: float, E_prime: float) -> float:
    """Scattering angle (radians) of a Compton event from ``E`` to ``E_prime`` keV."""
    if not 0.0 < E_prime <= E:
        raise DomainError(f"need 0 < E' <= E, got E={E}, E'={E_prime}")
    c = 1.0 - ELECTRON_REST_ENERGY_KEV * (1.0 / E_prime - 1.0 / E)
    if c < -1.0 - 1e-12:
        raise DomainError(f"unphysical energy pair (cos omega = {c:.6g})")
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def angle_to_energy(E: float, omega: float) -> float:
    """Scattered photon energy for incident energy ``E`` and angle ``omega``."""
    return E / (1.0 + (E / ELECTRON_REST_ENERGY_KEV) * (1.0 - np.cos(omega)))


def _check_z(params: LemonParams, z):
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) >= params.half_extent):
        raise DomainError("|z| must be below the half extent; apexes are excluded")
    return z


def axis_distance(params: LemonParams, z):
    """Distance ``t(z)`` from the lemon axis to the surface at axial offset ``z``."""
    z = _check_z(params, z)
    return np.sqrt(params.p**2 - z**2) - params.R


def surface_point(params: LemonParams, phi, z) -> np.ndarray:
    """Cartesian point(s) on the lemon at rotation ``phi`` and axial offset ``z``.

    ``phi = 0`` points from the axis towards the scanner centre.  Broadcasts
    over ``phi`` and ``z``; the trailing axis holds ``(x, y, z)``.
    """
    t = axis_distance(params, z)
    phi = np.asarray(phi, dtype=float)
    t, phi, z = np.broadcast_arrays(t, phi, z)
    ang = params.theta0 - phi
    x = np.cos(params.theta0) - t * np.cos(ang)
    y = np.sin(params.theta0) - t * np.sin(ang)
    return np.stack([x, y, z + params.z0], axis=-1)


def cylindrical_coords(params: LemonParams, phi, z):
    """Scanner-centred ``(r, theta)`` of surface points (law of cosines about the origin)."""
    pts = surface_point(params, phi, z)
    r = np.hypot(pts[..., 0], pts[..., 1])
    theta = np.arctan2(pts[..., 1], pts[..., 0]) % (2 * np.pi)
    return r, theta


def surface_measure_weight(params: LemonParams, z):
    """Area element ``dA / (dphi dz) = t p / sqrt(p^2 - z^2)``."""
    z = _check_z(params, z)
    rho = np.sqrt(params.p**2 - z**2)
    return (rho - params.R) * params.p / rho


def lemon_surface_area(params: LemonParams) -> float:
    a = params.half_extent
    p, R = params.p, params.R
    return float(2 * np.pi * p * (2 * a - 2 * R * np.arcsin(a / p)))


def defining_function(params: LemonParams, x) -> np.ndarray:
    """``(g + R)^2 + (z - z0)^2 - p^2`` with ``g`` the distance to the lemon axis."""
    x = np.asarray(x, dtype=float)
    c = params.axis_xy
    g = np.hypot(x[..., 0] - c[0], x[..., 1] - c[1])
    return (g + params.R) ** 2 + (x[..., 2] - params.z0) ** 2 - params.p**2


def slope_ratio(params: LemonParams, z):
    """``z / t(z)``, the quantity shown to be strictly increasing along the lemon."""
    return np.asarray(z, dtype=float) / axis_distance(params, z)
