"""Cochain snapshot files.

Binary layout (little-endian)::

    magic      8 bytes   b"SPMXCOCH"
    version    uint32    1
    complex    uint8     0 primal, 1 dual
    degree     uint8
    padding    2 bytes
    n          3 x int64
    h          3 x float64
    time       float64
    count      int64
    values     count x float64, entity order of :mod:`grid_complex`

A JSON sidecar ``<file>.json`` repeats the header for tooling.  A simulation
state is stored as two cochain files, ``<prefix>.dtilde.bin`` and
``<prefix>.b.bin``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .dynamics import SimState
from .grid_complex import Cochain, GridSpec

MAGIC = b"SPMXCOCH"
VERSION = 1
_HEADER = struct.Struct("<8sIBB2x3q3ddq")
_COMPLEX_CODE = {"primal": 0, "dual": 1}
_CODE_COMPLEX = {v: k for k, v in _COMPLEX_CODE.items()}


class SnapshotError(ValueError):
    pass


def header_dict(c: Cochain, time: float) -> dict:
    return {
        "format": "splitmaxwell-cochain",
        "version": VERSION,
        "complex_id": c.complex_id,
        "degree": c.degree,
        "n": list(c.grid.n),
        "h": list(c.grid.h),
        "time": time,
        "count": int(c.values.size),
        "dtype": "<f8",
    }


def write_cochain(path, c: Cochain, time: float = 0.0) -> Path:
    path = Path(path)
    header = _HEADER.pack(MAGIC, VERSION, _COMPLEX_CODE[c.complex_id], c.degree,
                          *c.grid.n, *c.grid.h, float(time), c.values.size)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(c.values, dtype="<f8").tobytes())
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(header_dict(c, time), indent=2, sort_keys=True) + "\n")
    return path


def read_header(path) -> dict:
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, version, code, degree, n1, n2, n3, h1, h2, h3, time, count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: not a cochain snapshot")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    if code not in _CODE_COMPLEX:
        raise SnapshotError(f"{path}: bad complex code {code}")
    return {"complex_id": _CODE_COMPLEX[code], "degree": degree, "n": (n1, n2, n3),
            "h": (h1, h2, h3), "time": time, "count": count}


def read_cochain(path) -> tuple[Cochain, float]:
    path = Path(path)
    hd = read_header(path)
    grid = GridSpec(hd["n"], hd["h"])
    values = np.fromfile(path, dtype="<f8", offset=_HEADER.size)
    if values.size != hd["count"]:
        raise SnapshotError(f"{path}: expected {hd['count']} values, found {values.size}")
    return Cochain(grid, hd["complex_id"], hd["degree"], values.astype(np.float64)), hd["time"]


def state_paths(prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    return (prefix.with_name(prefix.name + ".dtilde.bin"),
            prefix.with_name(prefix.name + ".b.bin"))


def write_state(prefix, s: SimState) -> tuple[Path, Path]:
    pd, pb = state_paths(prefix)
    write_cochain(pd, s.dtilde, s.t)
    write_cochain(pb, s.b, s.t)
    return pd, pb


def read_state(prefix) -> SimState:
    pd, pb = state_paths(prefix)
    for p in (pd, pb):
        if not p.exists():
            raise SnapshotError(f"snapshot file {p} not found")
    dtilde, t1 = read_cochain(pd)
    b, t2 = read_cochain(pb)
    if t1 != t2:
        raise SnapshotError(f"snapshot times differ: {t1} vs {t2}")
    return SimState(dtilde, b, t1)


def read_state_header(prefix) -> dict:
    """Header of the displacement file, checked against the flux file."""
    pd, pb = state_paths(prefix)
    for p in (pd, pb):
        if not p.exists():
            raise SnapshotError(f"snapshot file {p} not found")
    hd, hb = read_header(pd), read_header(pb)
    if (hd["complex_id"], hd["degree"]) != ("dual", 2) or (hb["complex_id"], hb["degree"]) != ("primal", 2):
        raise SnapshotError(f"{prefix}: snapshot pair does not hold (dual 2, primal 2) cochains")
    if hd["n"] != hb["n"] or hd["h"] != hb["h"]:
        raise SnapshotError(f"{prefix}: snapshot pair lives on different grids")
    return hd
