"""Serialization: binary snapshot stores, field dumps, and CSV traces.

Snapshot store layout (little-endian throughout):

    magic   6 bytes  b"QGROM1"
    version u32      currently 1
    nx      u32
    ny      u32
    n_snap  u32
    tag     1 byte   b"q" / b"p" (stream function) / b"m" (POD mode)
    lifting 1 byte   0 or 1
    [lifting field: nx*ny f64, row-major]
    per snapshot: time f64, then nx*ny cell values f64, row-major

The byte length is exactly derivable from the header; readers reject any
magic/version/length mismatch.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .field import Field
from .mesh import Mesh, build_mesh
from .pod import SnapshotSet

MAGIC = b"QGROM1"
VERSION = 1
_TAG_BYTES = {"q": b"q", "psi": b"p", "mode": b"m"}
_TAG_NAMES = {v: k for k, v in _TAG_BYTES.items()}
_HEADER = struct.Struct("<6sIIIIcB")


class StoreFormatError(ValueError):
    """Malformed or foreign snapshot store."""


def write_snapshots(snaps: SnapshotSet, path) -> None:
    """Serialize a snapshot set (and its lifting field, if any)."""
    tag = _TAG_BYTES.get(snaps.tag)
    if tag is None:
        raise ValueError(f"unknown snapshot tag {snaps.tag!r}")
    mesh = snaps.mesh
    has_lift = snaps.lifting is not None
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, mesh.nx, mesh.ny, len(snaps),
                              tag, 1 if has_lift else 0))
        if has_lift:
            fh.write(np.ascontiguousarray(snaps.lifting.values, dtype="<f8").tobytes())
        for t, f in zip(snaps.times, snaps.fields):
            fh.write(struct.pack("<d", float(t)))
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshots(path, bounds: tuple[float, float, float, float] = (0.0, 1.0, -1.0, 1.0),
                   mesh: Mesh | None = None) -> SnapshotSet:
    """Read a snapshot store back into a SnapshotSet.

    The store does not carry domain bounds; pass them (or a ready mesh)
    from the run configuration.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise StoreFormatError(f"{path}: truncated header")
    magic, version, nx, ny, n_snap, tag, has_lift = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if tag not in _TAG_NAMES:
        raise StoreFormatError(f"{path}: unknown variable tag {tag!r}")
    if has_lift not in (0, 1):
        raise StoreFormatError(f"{path}: bad lifting flag {has_lift}")
    n_cells = nx * ny
    expected = _HEADER.size + has_lift * 8 * n_cells + n_snap * 8 * (1 + n_cells)
    if len(raw) != expected:
        raise StoreFormatError(
            f"{path}: byte length {len(raw)} does not match header (expected {expected})")

    if mesh is None:
        mesh = build_mesh(nx, ny, bounds)
    elif (mesh.nx, mesh.ny) != (nx, ny):
        raise StoreFormatError(f"{path}: store is {nx}x{ny}, mesh is {mesh.nx}x{mesh.ny}")

    off = _HEADER.size
    lifting = None
    if has_lift:
        vals = np.frombuffer(raw, dtype="<f8", count=n_cells, offset=off).copy()
        lifting = Field(mesh, vals)
        off += 8 * n_cells
    times = np.empty(n_snap)
    fields = []
    for k in range(n_snap):
        (times[k],) = struct.unpack_from("<d", raw, off)
        off += 8
        vals = np.frombuffer(raw, dtype="<f8", count=n_cells, offset=off).copy()
        fields.append(Field(mesh, vals))
        off += 8 * n_cells
    return SnapshotSet(mesh=mesh, times=times, fields=fields,
                       tag=_TAG_NAMES[tag], lifting=lifting)


def write_field_dump(field: Field, path) -> None:
    """CSV dump (x, y, value), one row per cell in row-major order; values
    carry 17 significant digits so 64-bit floats round-trip exactly."""
    mesh = field.mesh
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for (x, y), v in zip(mesh.cell_centroids, field.values):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")


def read_field_dump(path, mesh: Mesh) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (mesh.n_cells, 3):
        raise StoreFormatError(f"{path}: expected {mesh.n_cells} rows, got {data.shape[0]}")
    return Field(mesh, data[:, 2].copy())


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) or isinstance(v, np.floating):
        return f"{float(v):.17g}"
    return str(v)
