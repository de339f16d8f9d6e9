"""File formats: raw little-endian float32 payloads with JSON sidecars.

A payload ``name.raw`` is described by ``name.raw.json``.  Every writer
goes through a temporary file and an atomic rename.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .data import Axis, Sinogram, Volume, axes_from_descriptor

F32 = np.dtype("<f4")
C64 = np.dtype("<c8")


class FormatError(ValueError):
    """A file or its sidecar is malformed."""


def atomic_write_bytes(path, payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def write_json(path, obj):
    atomic_write_bytes(path, (json.dumps(obj, indent=2, default=_jsonable) + "\n").encode())


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def sidecar(path) -> Path:
    return Path(f"{path}.json")


def _read_payload(path, dtype, count):
    try:
        raw = np.fromfile(path, dtype=dtype)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if raw.size != count:
        raise FormatError(f"{path} holds {raw.size} values, sidecar promises {count}")
    return raw


def write_volume(path, vol: Volume):
    atomic_write_bytes(path, np.ascontiguousarray(vol.data, dtype=F32).tobytes())
    write_json(sidecar(path), {"type": "volume", "dims": list(vol.dims),
                               "spacing": list(vol.spacing), "origin": list(vol.origin)})


def read_volume(path) -> Volume:
    meta = read_json(sidecar(path))
    try:
        dims = tuple(int(d) for d in meta["dims"])
        spacing, origin = meta["spacing"], meta["origin"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad volume sidecar for {path}: {exc}") from exc
    data = _read_payload(path, F32, int(np.prod(dims))).reshape(dims)
    return Volume(data, origin, spacing)


def write_sinogram(path, sino: Sinogram):
    atomic_write_bytes(path, np.ascontiguousarray(sino.data, dtype=F32).tobytes())
    write_json(sidecar(path), {"type": "sinogram", "shape": list(sino.axes.shape),
                               "axes": sino.axes.descriptor()})


def read_sinogram(path) -> Sinogram:
    meta = read_json(sidecar(path))
    try:
        axes = axes_from_descriptor(meta["axes"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"bad sinogram sidecar for {path}: {exc}") from exc
    return Sinogram(axes, _read_payload(path, F32, axes.size))


def write_modes(path, modes):
    """Dump a mode set as complex64 ``values[radial, n, eta]``."""
    atomic_write_bytes(path, np.ascontiguousarray(modes.values, dtype=C64).tobytes())
    write_json(sidecar(path), {
        "type": "modes", "kind": modes.kind, "shape": list(modes.values.shape),
        "grid": modes.grid, "n": modes.n, "eta": modes.eta, "n_pad": modes.n_pad,
        "z_axis": modes.z_axis.descriptor(), "present": modes.present, "stable": modes.stable})


def read_modes(path):
    from .spectral import ModeSet

    meta = read_json(sidecar(path))
    shape = tuple(meta["shape"])
    values = _read_payload(path, C64, int(np.prod(shape))).reshape(shape)
    za = meta["z_axis"]
    return ModeSet(meta["kind"], np.array(meta["grid"]), np.array(meta["n"]),
                   np.array(meta["eta"]), values, Axis(za[0], za[1], int(za[2])),
                   int(meta["n_pad"]), np.array(meta["present"], bool),
                   np.array(meta["stable"], bool))


def write_pgm(path, image, vmin=None, vmax=None):
    """8-bit binary PGM of a 2-D array, linearly scaled to ``[vmin, vmax]``."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-D slice")
    lo = img.min() if vmin is None else vmin
    hi = img.max() if vmax is None else vmax
    scaled = np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)
    pix = np.clip(np.rint(scaled * 255), 0, 255).astype(np.uint8)
    # rows of the image run along the second array axis, top row first
    pix = pix.T[::-1]
    header = f"P5\n{pix.shape[1]} {pix.shape[0]}\n255\n".encode()
    atomic_write_bytes(path, header + pix.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise FormatError(f"{path} is not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_bytes(path, buf.getvalue().encode())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in row] for row in rows[1:]]


def write_locus(path, locus):
    rows = [(repr(float(t)), *(repr(float(c)) for c in p))
            for t, p in zip(locus.theta0, locus.points)]
    write_csv(path, ("theta0", "x", "y", "z"), rows)
