"""Simulation and reconstruction for lemon-surface Compton scatter tomography."""
__version__ = "0.1.0"

from .data import Axis, FullAxes, LimitedAxes, SeparationAxes, Sinogram, Volume
from .forward import (ForwardOperator, NoiseSpec, Quadrature, add_noise, adjoint, apply,
                      build_operator, integrate_lemon)
from .geometry import (CylinderDomain, DomainError, LemonParams, LimitedLemonParams,
                       energy_to_angle, lemon_surface_area, limited_to_full, surface_point)
from .phantoms import PhantomSpec, make_phantom
from .reconstruction import SolverConfig, cgls_tv, landweber, nncgls, relative_error, tv_prox
from .spectral import spectral_reconstruct

__all__ = [
    "Axis", "CylinderDomain", "DomainError", "ForwardOperator", "FullAxes", "LemonParams",
    "LimitedAxes", "LimitedLemonParams", "NoiseSpec", "PhantomSpec", "Quadrature",
    "SeparationAxes", "Sinogram", "SolverConfig", "Volume", "add_noise", "adjoint", "apply",
    "build_operator", "cgls_tv", "energy_to_angle", "integrate_lemon", "landweber",
    "lemon_surface_area", "limited_to_full", "make_phantom", "nncgls", "relative_error",
    "spectral_reconstruct", "surface_point", "tv_prox",
]
