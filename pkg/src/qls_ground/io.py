"""Reading and writing fields.

Two formats are supported.  The CSV form has the header
``index_0,...,index_{N-1},value`` and one row per node in lexicographic
(row-major) order.  The binary form is a raw little-endian float64 dump in
the same order, next to a JSON sidecar ``<name>.json`` with ``dim``, ``L``,
``M`` and ``boundary``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import GridMismatchError
from .grid import Field, GridSpec

_LE_FLOAT = np.dtype("<f8")


def write_field_csv(f: Field, path) -> None:
    g = f.grid
    idx = np.indices(g.shape).reshape(g.dim, -1).T
    header = ",".join([f"index_{i}" for i in range(g.dim)] + ["value"])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row, val in zip(idx, f.values.ravel()):
            fh.write(",".join(str(int(i)) for i in row) + f",{float(val)!r}\n")


def read_field_csv(grid: GridSpec, path) -> Field:
    """Read a field written by :func:`write_field_csv`; rows may come in any order."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != grid.dim + 1:
        raise GridMismatchError(f"{path}: expected {grid.dim + 1} columns, found {data.shape[1]}")
    if data.shape[0] != grid.size:
        raise GridMismatchError(f"{path}: expected {grid.size} rows, found {data.shape[0]}")
    values = np.zeros(grid.shape)
    values[tuple(data[:, :-1].astype(np.intp).T)] = data[:, -1]
    return Field(grid, values)


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def grid_descriptor(grid: GridSpec) -> dict:
    return {"dim": grid.dim, "L": grid.half_extent, "M": grid.points_per_dim, "boundary": grid.boundary}


def write_field_binary(f: Field, path) -> None:
    """Raw little-endian doubles plus a sidecar ``path + '.json'`` describing the grid."""
    Path(path).write_bytes(f.values.astype(_LE_FLOAT).tobytes(order="C"))
    sidecar_path(path).write_text(json.dumps(grid_descriptor(f.grid)), encoding="utf-8")


def read_field_binary(path, grid: GridSpec | None = None) -> Field:
    """Load a binary dump.  Without ``grid`` the sidecar decides; with it, the two must agree."""
    side = sidecar_path(path)
    described = None
    if side.exists():
        d = json.loads(side.read_text(encoding="utf-8"))
        described = GridSpec(int(d["dim"]), float(d["L"]), int(d["M"]), d.get("boundary", "zero"))
    if grid is None:
        if described is None:
            raise FileNotFoundError(f"no grid given and no sidecar {side}")
        grid = described
    elif described is not None and described != grid:
        raise GridMismatchError(f"{path}: sidecar grid {described} differs from {grid}")
    raw = np.frombuffer(Path(path).read_bytes(), dtype=_LE_FLOAT)
    if raw.size != grid.size:
        raise GridMismatchError(f"{path}: {raw.size} values for a grid of {grid.size}")
    return Field(grid, raw.astype(np.float64).reshape(grid.shape))
