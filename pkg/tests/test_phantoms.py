import numpy as np
import pytest

from lemoncst.geometry import CylinderDomain
from lemoncst.phantoms import PhantomSpec, make_phantom


def test_spin_top_is_axisymmetric_and_binary():
    vol = make_phantom(PhantomSpec("spin_top"), 41)
    d = vol.data
    assert set(np.unique(d)) == {0.0, 1.0}
    # quarter turns about the z axis map the voxel grid onto itself
    np.testing.assert_array_equal(d, np.rot90(d, 1, axes=(0, 1)))
    np.testing.assert_array_equal(d, d[::-1])
    assert np.all(d[vol.radius() > 0.8 + 1e-9] == 0)


def test_layered_bricks_levels_and_layers():
    vol = make_phantom(PhantomSpec("layered_bricks"), 41)
    d = vol.data
    vals, counts = np.unique(d, return_counts=True)
    assert list(vals) == [0.0, 1.0, 2.0]
    # the checkerboard splits the brick volume about evenly between the two levels
    assert abs(counts[1] - counts[2]) <= 0.01 * (counts[1] + counts[2])
    # adjacent layers swap levels
    ix, iy = np.unravel_index(np.argmax(d.sum(axis=2)), d.shape[:2])
    col = d[ix, iy][d[ix, iy] > 0]
    assert len(np.unique(col)) == 2


def test_delta_and_ball():
    vol = make_phantom(PhantomSpec("delta", point=(0.5, 0.0, 0.0), density=3.0), 21)
    assert vol.data.sum() == 3.0
    idx = np.unravel_index(np.argmax(vol.data), vol.dims)
    np.testing.assert_allclose(vol.coordinates()[idx], [0.5, 0, 0], atol=max(vol.spacing))
    ball = make_phantom(PhantomSpec("ball", radius=0.5), 21)
    assert ball.data.max() <= 1.0 and ball.data.min() >= 0.0
    flat = make_phantom(PhantomSpec("ball", radius=0.5, smooth=False), 21)
    assert set(np.unique(flat.data)) == {0.0, 1.0}


def test_custom_and_support_warning():
    with pytest.warns(UserWarning, match="support"):
        make_phantom(PhantomSpec("custom", func=lambda x, y, z: np.ones_like(x)), 9)
    with pytest.raises(ValueError):
        PhantomSpec("custom")
    with pytest.raises(ValueError):
        PhantomSpec("torus")
    spec = PhantomSpec("ball", radius=0.3)
    assert spec.describe() == {"kind": "ball", "density": 1.0, "center": (0.0, 0.0, 0.0),
                               "radius": 0.3, "smooth": True}


def test_dims_and_domain():
    vol = make_phantom(PhantomSpec("ball"), (11, 11, 21), CylinderDomain(half_height=3.0))
    assert vol.dims == (11, 11, 21)
    assert vol.axes()[2][-1] == pytest.approx(3.0 - 3.0 / 21)
