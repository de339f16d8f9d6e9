import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lemoncst.geometry import (
    CylinderDomain,
    DomainError,
    LemonParams,
    LimitedLemonParams,
    angle_to_energy,
    axis_distance,
    defining_function,
    energy_to_angle,
    lemon_surface_area,
    limited_to_full,
    slope_ratio,
    surface_measure_weight,
    surface_point,
)


def test_energy_angle_examples():
    assert energy_to_angle(662, 662) == 0.0
    # E' at a right angle is 662 / (1 + 662/511) = 288.3905...
    assert abs(energy_to_angle(662, 288.42) - np.pi / 2) < 1e-3
    assert energy_to_angle(662, angle_to_energy(662, np.pi / 2)) == pytest.approx(np.pi / 2, abs=1e-12)
    with pytest.raises(DomainError):
        energy_to_angle(662, 1)
    with pytest.raises(DomainError):
        energy_to_angle(662, 700)


@given(st.floats(0.0, np.pi))
def test_energy_angle_round_trip(omega):
    E = 662.0
    assert energy_to_angle(E, angle_to_energy(E, omega)) == pytest.approx(omega, abs=1e-6)


@pytest.mark.parametrize("h,p,R", [(2.0, 2.0, 0.0), (1.0, 2.5, 1.5), (0.5, 4.25, 3.75)])
def test_limited_to_full_examples(h, p, R):
    lp = limited_to_full(LimitedLemonParams(h), 2.0)
    assert lp.p == pytest.approx(p, rel=1e-14)
    assert lp.R == pytest.approx(R, abs=1e-14)


def test_limited_to_full_errors():
    for h in (0.0, -1.0, 2.5):
        with pytest.raises(DomainError):
            limited_to_full(LimitedLemonParams(h), 2.0)


@given(st.floats(1e-3, 2.0), st.floats(0.5, 3.0))
def test_limited_separation_invariant(h, alpha):
    if h > alpha:
        return
    lp = limited_to_full(LimitedLemonParams(h), alpha)
    assert abs(lp.p**2 - lp.R**2 - alpha**2) <= 1e-12 * alpha**2 * max(1.0, lp.p**2 / alpha**2)


def test_surface_point_examples():
    np.testing.assert_allclose(surface_point(LemonParams(2, 0), 0.0, 0.0), [-1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(surface_point(LemonParams(2.5, 1.5), np.pi, 0.0), [2, 0, 0],
                               atol=1e-15)
    lp = LemonParams(2.5, 1.5)
    for z in (2.0, -2.0, 2.5):
        with pytest.raises(DomainError):
            surface_point(lp, 0.0, z)


def test_measure_weight_examples():
    assert surface_measure_weight(LemonParams(2, 0), 0.0) == pytest.approx(2.0)
    assert surface_measure_weight(LemonParams(2.5, 1.5), 0.0) == pytest.approx(1.0)
    t = np.sqrt(6.25 - 3.61) - 1.5
    assert surface_measure_weight(LemonParams(2.5, 1.5), 1.9) == pytest.approx(
        t * 2.5 / np.sqrt(6.25 - 3.61), rel=1e-14)
    assert surface_measure_weight(LemonParams(2.5, 1.5), 1.9) == pytest.approx(0.1920, abs=1e-4)


@pytest.mark.parametrize("p,R", [(2.0, 0.0), (2.5, 1.5), (4.25, 3.75), (3.0, 0.5)])
def test_area_closed_form_vs_quadrature(p, R):
    lp = LemonParams(p, R)
    a = lp.half_extent
    # independent adaptive quadrature of the area element, times 2 pi for phi
    val, _ = integrate.quad(lambda z: surface_measure_weight(lp, z), -a, a, epsabs=1e-13,
                            epsrel=1e-13, limit=200)
    assert lemon_surface_area(lp) == pytest.approx(2 * np.pi * val, rel=1e-10)


def test_area_examples():
    assert lemon_surface_area(LemonParams(2, 0)) == pytest.approx(16 * np.pi, rel=1e-14)
    assert lemon_surface_area(LemonParams(2.5, 1.5)) == pytest.approx(19.135, abs=1e-3)


def test_midpoint_area_converges():
    lp = LemonParams(2.5, 1.5)
    a = lp.half_extent
    exact = lemon_surface_area(lp)
    errs = []
    for n in (64, 128, 256, 512):
        z = -a + (np.arange(n) + 0.5) * 2 * a / n
        errs.append(abs(2 * np.pi * surface_measure_weight(lp, z).sum() * 2 * a / n - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.0)


@settings(max_examples=60)
@given(st.floats(0.05, 2.0), st.floats(0, 2 * np.pi), st.floats(-1, 1),
       st.floats(-np.pi, np.pi), st.floats(-0.999, 0.999))
def test_surface_point_on_defining_function(h, theta0, z0, phi, frac):
    lp = limited_to_full(LimitedLemonParams(h, theta0, z0), 2.0)
    x = surface_point(lp, phi, frac * lp.half_extent)
    assert abs(defining_function(lp, x)) < 1e-10 * max(1.0, lp.p**2)


def test_slope_ratio_strictly_increasing():
    for p, R in [(2.0, 0.0), (2.5, 1.5), (4.25, 3.75), (40.0, 39.95)]:
        lp = LemonParams(p, R)
        z = np.linspace(-1, 1, 2001)[1:-1] * lp.half_extent
        assert np.all(np.diff(slope_ratio(lp, z)) > 0)


def test_axis_distance_apex_limit():
    lp = LemonParams(2.5, 1.5)
    assert axis_distance(lp, 0.0) == pytest.approx(1.0)
    assert axis_distance(lp, 0.999999 * lp.half_extent) < 1e-5


def test_theta0_normalized_and_validation():
    assert LemonParams(2, 0, theta0=-np.pi / 2).theta0 == pytest.approx(1.5 * np.pi)
    with pytest.raises(DomainError):
        LemonParams(1.0, 1.0)
    with pytest.raises(DomainError):
        CylinderDomain(epsilon=0.0)
    with pytest.raises(DomainError):
        CylinderDomain(half_height=1.0)
