"""Binary container for fields on the grid.

Layout of a ``.hff`` file::

    HFLAB-FIELD 1\\n
    <one line of JSON header>\\n
    <raw little-endian float64 data>

The header carries ``kind``, ``grid`` ([n_alpha, n_beta, n_gamma]),
``components`` (per-node component shape) and ``index_order``. Data are
row-major: node axes (alpha, beta, gamma) slowest, then component axes, so a
framing is a sequence of 3x3 matrices stored row by row. Tensor index
orders are ``k,i,j`` for structure functions and ``k,i,j,l`` for the linear
curvature, slowest to fastest.
"""

import json
from pathlib import Path

import numpy as np

from hflab.framing import Framing, GaugeField
from hflab.grid import build_grid

MAGIC = b"HFLAB-FIELD 1\n"

INDEX_ORDER = {
    "framing": "i,s",
    "gauge": "i,j",
    "structure": "k,i,j",
    "curvature": "k,i,j,l",
    "h_tensor": "k,j",
    "scalar": "",
}


class ContainerError(ValueError):
    pass


def write_field(path, grid, data, kind, **extra):
    data = np.ascontiguousarray(data, dtype="<f8")
    if data.shape[:3] != grid.shape:
        raise ContainerError("data does not match grid")
    header = {
        "kind": kind,
        "grid": list(grid.shape),
        "components": list(data.shape[3:]),
        "index_order": INDEX_ORDER.get(kind, ""),
        "dtype": "<f8",
    }
    header.update(extra)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(data.tobytes())
    return path


def read_field(path):
    """(header, grid, data) from a container file."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ContainerError(f"{path} is not an HFLAB field container")
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise ContainerError(f"bad header in {path}") from exc
        raw = fh.read()
    grid = build_grid(*header["grid"])
    shape = tuple(header["grid"]) + tuple(header["components"])
    data = np.frombuffer(raw, dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ContainerError(f"{path}: expected {np.prod(shape)} values, found {data.size}")
    return header, grid, data.reshape(shape).copy()


def save_framing(path, w, **extra):
    return write_field(path, w.grid, w.A, "framing", **extra)


def save_gauge(path, a, **extra):
    return write_field(path, a.grid, a.a, "gauge", **extra)


def load_framing(path):
    header, grid, data = read_field(path)
    if header["kind"] not in ("framing", "gauge") or data.shape[3:] != (3, 3):
        raise ContainerError(f"{path} does not hold a matrix field")
    return Framing(grid, data)


def load_gauge(path):
    header, grid, data = read_field(path)
    if data.shape[3:] != (3, 3):
        raise ContainerError(f"{path} does not hold a matrix field")
    return GaugeField(grid, data)
