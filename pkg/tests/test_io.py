import json

import numpy as np
import pytest

from lemoncst import io as fio
from lemoncst.data import Axis, FullAxes, LimitedAxes, SeparationAxes, Sinogram, Volume
from lemoncst.microlocal import artifact_locus
from lemoncst.spectral import decompose


def test_volume_round_trip(tmp_path):
    vol = Volume(np.random.default_rng(0).random((4, 5, 6)), (-1, -0.5, -2), (0.5, 0.25, 0.8))
    fio.write_volume(tmp_path / "v.raw", vol)
    back = fio.read_volume(tmp_path / "v.raw")
    assert back.dims == (4, 5, 6)
    assert back.origin == vol.origin and back.spacing == vol.spacing
    np.testing.assert_array_equal(back.data, vol.data.astype(np.float32))
    # payload is raw little-endian float32, C order
    raw = (tmp_path / "v.raw").read_bytes()
    assert len(raw) == 4 * 120
    assert np.frombuffer(raw, "<f4")[7] == np.float32(vol.data.ravel()[7])
    meta = json.loads((tmp_path / "v.raw.json").read_text())
    assert meta["type"] == "volume" and meta["dims"] == [4, 5, 6]


@pytest.mark.parametrize("axes", [
    LimitedAxes.default(n_h=3, n_theta=4, n_z=5),
    FullAxes(Axis(2, 3, 2), Axis(0, 1, 3), Axis.periodic(4), Axis(-1, 1, 2)),
    SeparationAxes(Axis(0.5, 1, 2), Axis(1, 2, 2), Axis.periodic(3), Axis(-1, 1, 2)),
])
def test_sinogram_round_trip(tmp_path, axes):
    s = Sinogram(axes, np.arange(axes.size, dtype=float))
    fio.write_sinogram(tmp_path / "s.raw", s)
    back = fio.read_sinogram(tmp_path / "s.raw")
    assert back.axes == axes
    np.testing.assert_array_equal(back.data, s.data)


def test_modes_round_trip(tmp_path):
    axes = LimitedAxes.default(n_h=3, n_theta=4, n_z=5)
    m = decompose(Sinogram(axes, np.random.default_rng(1).random(axes.shape)))
    fio.write_modes(tmp_path / "m.raw", m)
    back = fio.read_modes(tmp_path / "m.raw")
    np.testing.assert_allclose(back.values, m.values, rtol=1e-6)
    np.testing.assert_array_equal(back.n, m.n)
    assert back.z_axis == m.z_axis and back.n_pad == m.n_pad


def test_truncated_payload_and_bad_sidecar(tmp_path):
    vol = Volume(np.ones((2, 2, 2)), (0, 0, 0), (1, 1, 1))
    fio.write_volume(tmp_path / "v.raw", vol)
    (tmp_path / "v.raw").write_bytes(b"\0" * 12)
    with pytest.raises(fio.FormatError):
        fio.read_volume(tmp_path / "v.raw")
    (tmp_path / "w.raw").write_bytes(b"")
    (tmp_path / "w.raw.json").write_text("{not json")
    with pytest.raises(fio.FormatError):
        fio.read_volume(tmp_path / "w.raw")
    with pytest.raises(fio.FormatError):
        fio.read_volume(tmp_path / "missing.raw")


def test_pgm_round_trip(tmp_path):
    img = np.arange(12, dtype=float).reshape(3, 4)
    fio.write_pgm(tmp_path / "a.pgm", img)
    pix = fio.read_pgm(tmp_path / "a.pgm")
    assert pix.shape == (4, 3)
    # first array axis runs left to right, second bottom to top
    assert pix[-1, 0] == 0 and pix[0, -1] == 255
    with pytest.raises(ValueError):
        fio.write_pgm(tmp_path / "b.pgm", np.zeros(3))


def test_csv_and_locus(tmp_path):
    loc = artifact_locus([0.5, 0.0, 0.2], 8)
    fio.write_locus(tmp_path / "l.csv", loc)
    header, rows = fio.read_csv(tmp_path / "l.csv")
    assert header == ["theta0", "x", "y", "z"]
    np.testing.assert_array_equal(np.array(rows)[:, 1:], loc.points)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    fio.write_json(tmp_path / "x.json", {"a": np.float64(1.5), "b": np.arange(2)})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": 1.5, "b": [0, 1]}
    assert sorted(p.name for p in tmp_path.iterdir()) == ["x.json"]
