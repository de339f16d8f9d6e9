import numpy as np
import pytest
from scipy import integrate

from lemoncst.data import Axis, FullAxes, LimitedAxes, Sinogram, Volume
from lemoncst.geometry import (
    DomainError,
    LimitedLemonParams,
    limited_to_full,
    surface_measure_weight,
    surface_point,
)
from lemoncst.spectral import (
    KernelTable,
    ModeProfile,
    ModeSet,
    decompose,
    forward_modes,
    kernel_diagonal,
    kernel_eval,
    polar_samples,
    resynthesize,
    solve_modes,
    spectral_reconstruct,
    volterra_solve,
)


def _lemon_integral(h, func_r_theta_z, n=1500):
    """Midpoint rule over one limited lemon at theta0 = 0, z0 = 0."""
    lp = limited_to_full(LimitedLemonParams(h), 2.0)
    a = lp.half_extent
    z = -a + (np.arange(n) + 0.5) * 2 * a / n
    ph = -np.pi + (np.arange(n) + 0.5) * 2 * np.pi / n
    Z, PH = np.meshgrid(z, ph, indexing="ij")
    pts = surface_point(lp, PH, Z)
    r = np.hypot(pts[..., 0], pts[..., 1])
    th = np.arctan2(pts[..., 1], pts[..., 0])
    w = surface_measure_weight(lp, Z) * (2 * a / n) * (2 * np.pi / n)
    return float(np.sum(w * func_r_theta_z(r, th, Z)))


def test_kernel_diagonal_example():
    # p(0.5) = 2 when alpha^2 = 1.75
    assert kernel_diagonal(0.5, np.sqrt(1.75)) == pytest.approx(1.1107, abs=1e-4)
    assert kernel_eval(3, 2.0, 0.5, 0.5, alpha=np.sqrt(1.75)) == pytest.approx(
        np.pi * np.sqrt(2 * 0.25) / 2, rel=1e-12)


def test_kernel_domain_errors():
    for h, u in [(0.5, 0.6), (0.5, 0.0), (1.0, 0.5), (0.5, -0.1)]:
        with pytest.raises(DomainError):
            kernel_eval(0, 0.0, h, u)
    with pytest.raises(DomainError):
        kernel_eval(0, 0.0, 0.5, 0.1, epsilon=0.2)
    with pytest.raises(DomainError):
        kernel_eval(0, 0.0, 0.95, 0.5, kappa=0.1)


def test_kernel_symmetries():
    for h, u in [(0.3, 0.1), (0.8, 0.5)]:
        k = kernel_eval(3, 2.0, h, u)
        assert kernel_eval(-3, 2.0, h, u) == k
        assert kernel_eval(3, -2.0, h, u) == k


@pytest.mark.parametrize("n,eta,h", [(0, 0.0, 0.5), (2, 1.0, 0.7), (5, 5.0, 0.9), (1, 3.0, 0.3)])
def test_kernel_against_brute_force_lemon_integral(n, eta, h):
    """A lemon integral of phi(r) cos(n theta) cos(eta z) equals int 4 K_n phi(1 - u) du."""
    def phi(r):
        return np.exp(-((r - 0.6) / 0.15) ** 2) * (r < 0.95)

    brute = _lemon_integral(h, lambda r, th, z: phi(r) * np.cos(n * th) * np.cos(eta * z), 3000)
    via_kernel = integrate.quad(lambda u: 4 * kernel_eval(n, eta, h, u, n_nodes=256) * phi(1 - u),
                                1e-9, h, limit=200, points=[0.05, 0.4])[0]
    assert via_kernel == pytest.approx(brute, rel=2e-5)


def test_volterra_zero_and_identity():
    h = np.linspace(0.9 / 64, 0.9, 64)
    rng = np.random.default_rng(0)
    for n, eta in [(0, 0.0), (3, 1.0), (8, 0.0), (2, 2.0)]:
        K = KernelTable.build(n, eta, h)
        zero = volterra_solve(ModeProfile(n, eta, h, np.zeros(64)), K)
        assert np.all(zero.values == 0)
        f = ModeProfile(n, eta, K.midpoints, rng.standard_normal(64) + 1j * rng.standard_normal(64),
                        "f")
        back = volterra_solve(forward_modes(f, K), K)
        assert np.abs(back.values - f.values).max() <= 1e-8 * np.abs(f.values).max()
        np.testing.assert_allclose(back.grid, K.midpoints)


def test_product_rule_diagonal_tracks_closed_form():
    h = np.linspace(0.01, 0.9, 90)
    K = KernelTable.build(0, 0.0, h)
    cell = np.diff(K.edges)
    # M[i, i] ~ Kt(h_i, h_i) * cell width for a narrow cell
    ratio = np.diag(K.matrix) / (K.diagonal() * cell)
    assert np.all(np.abs(ratio[1:] - 1) < 0.05)


def test_volterra_warns_on_tiny_pivot():
    h = np.array([0.2, 0.4])
    K = KernelTable(0, 0.0, h, np.array([[1.0, 0.0], [1.0, 1e-14]]))
    with pytest.warns(RuntimeWarning, match="condition"):
        volterra_solve(ModeProfile(0, 0.0, h, np.ones(2)), K)
    with pytest.raises(ValueError):
        volterra_solve(ModeProfile(0, 0.0, h[::-1], np.ones(2)), K)


def test_n0_profile_against_brute_force_forward_simulation():
    """Axisymmetric ball: the (n=0, eta=0) mode solve matches the z-integrated profile."""
    R0 = 0.7

    def F(r):
        # z-integral of the cos^2 ball at cylindrical radius r
        r = float(r)
        if r >= R0:
            return 0.0
        zm = np.sqrt(R0**2 - r**2)
        return integrate.quad(lambda z: np.cos(np.pi * np.hypot(r, z) / (2 * R0)) ** 2,
                              -zm, zm)[0]

    r_fine = np.linspace(0, 1, 2001)
    F_fine = np.array([F(r) for r in r_fine])

    def profile(r, th, z):
        return np.interp(r, r_fine, F_fine)

    h = np.linspace(0.9 / 64, 0.9, 64)
    g = np.array([_lemon_integral(hh, profile, 800) for hh in h])
    K = KernelTable.build(0, 0.0, h)
    f = volterra_solve(ModeProfile(0, 0.0, h, g), K)
    truth = np.array([F(1 - u) for u in f.grid])
    assert np.abs(f.values.real - truth).max() <= 0.05 * truth.max()


def _sino(shape_fn, n_h=6, n_th=16, n_z=12):
    axes = LimitedAxes(Axis(0.15, 0.9, n_h), Axis.periodic(n_th), Axis(-1.5, 1.5, n_z))
    H, TH, Z = np.meshgrid(axes.h.values, axes.theta0.values, axes.z0.values, indexing="ij")
    return Sinogram(axes, shape_fn(H, TH, Z))


def test_decompose_orthogonality_and_parseval():
    rng = np.random.default_rng(1)
    w = rng.random((6, 1, 12))
    flat = decompose(_sino(lambda H, TH, Z: w + 0 * TH))
    nz = flat.n != 0
    assert np.abs(flat.values[:, nz]).max() < 1e-12 * np.abs(flat.values).max()
    two = decompose(_sino(lambda H, TH, Z: np.cos(2 * TH) * w))
    keep = np.abs(two.n) == 2
    assert np.abs(two.values[:, ~keep]).max() < 1e-12 * np.abs(two.values).max()
    assert np.abs(two.values[:, keep]).max() > 0.1 * np.abs(w).max()
    s = _sino(lambda H, TH, Z: rng.standard_normal(H.shape))
    assert decompose(s).energy() == pytest.approx(np.sum(s.data**2), rel=1e-12)


def test_decompose_rejects_bad_axes():
    full = FullAxes(Axis(2, 3, 2), Axis(0, 1, 2), Axis.periodic(4), Axis(-1, 1, 3))
    with pytest.raises(ValueError):
        decompose(Sinogram(full, np.zeros(full.shape)))
    bad = LimitedAxes(Axis(0.2, 0.8, 3), Axis(0.0, 2 * np.pi, 8), Axis(-1, 1, 4))
    with pytest.raises(ValueError):
        decompose(Sinogram(bad, np.zeros(bad.shape)))


def test_mode_round_trip_through_polar_samples():
    rng = np.random.default_rng(2)
    s = _sino(lambda H, TH, Z: rng.standard_normal(H.shape))
    gset = decompose(s)
    F, imag = polar_samples(gset)
    np.testing.assert_allclose(F, s.data, atol=1e-12)
    assert imag < 1e-10


def test_constant_mode_gives_radially_flat_volume():
    z_axis = Axis(-1.5, 1.5, 4)
    n_pad = 8
    n = np.array([0, 1, 2, -1])
    eta = 2 * np.pi * np.fft.fftfreq(n_pad, z_axis.step)
    u = np.linspace(0.1, 0.8, 8)
    vals = np.zeros((8, 4, n_pad), complex)
    vals[:, 0, 0] = 1.0
    fset = ModeSet("f", u, n, eta, vals, z_axis, n_pad)
    F, imag = polar_samples(fset)
    np.testing.assert_allclose(F, F.flat[0], rtol=1e-12)
    tmpl = Volume.zeros((15, 15, 4), xy_half_width=1.0)
    vol, blind = resynthesize(fset, tmpl, h_max=0.8)
    r = tmpl.radius()
    inner = (~blind) & (r <= 1 - u.min())
    assert inner.any()
    np.testing.assert_allclose(vol.data[inner], F.flat[0], rtol=1e-9)
    assert np.all(vol.data[r > 1 - u.min()] == 0)


def test_spectral_reconstruct_real_and_blind_core():
    axes = LimitedAxes.default(n_h=11, n_theta=12, n_z=9)
    H, TH, Z = np.meshgrid(axes.h.values, axes.theta0.values, axes.z0.values, indexing="ij")
    sino = Sinogram(axes, np.exp(-Z**2) * (1 + 0.3 * np.cos(TH)) * H)
    res = spectral_reconstruct(sino, Volume.zeros(15))
    assert res.imag_residue < 1e-10
    assert np.isrealobj(res.volume.data)
    # kappa is one height step
    assert res.h_max == pytest.approx(axes.h.values[axes.h.values <= 1 - 0.2 + 1e-12].max())
    r = Volume.zeros(15).radius()
    assert np.array_equal(res.blind, r < 1 - res.h_max)
    assert np.all(res.volume.data[res.blind] == 0)


def test_solve_modes_conditioning_cutoff():
    axes = LimitedAxes.default(n_h=11, n_theta=8, n_z=16)
    rng = np.random.default_rng(3)
    gset = decompose(Sinogram(axes, rng.standard_normal(axes.shape)))
    loose = solve_modes(gset, h_max=0.8)
    tight = solve_modes(gset, h_max=0.8, cond_max=1e3)
    assert loose.stable.all()
    assert 0 < tight.stable.sum() < tight.stable.size
    assert np.all(tight.values[:, ~tight.stable] == 0)
    with pytest.raises(DomainError):
        solve_modes(gset, h_max=0.01)
