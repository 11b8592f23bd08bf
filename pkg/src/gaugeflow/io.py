"""Checkpoints, atomic file output, deterministic JSON and seeded random streams."""
from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .fields import FieldConfig
from .lattice import LatticeSpec
from .lie import GroupKind

MAGIC = b"GFLX1"
_GROUP_CODES = {"u1": 0, "su2": 1}
_HEADER = struct.Struct("<5sBiB")


def atomic_write(path, data: bytes | str):
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- checkpoints ----------------------------------------------------------


def encode_checkpoint(cfg: FieldConfig) -> bytes:
    """Binary layout (little endian): magic, group code, rep charge, d,
    extents (u32 each), spacing (f64), then links and phi as complex128."""
    lat = cfg.lattice
    parts = [
        _HEADER.pack(MAGIC, _GROUP_CODES[cfg.group.kind], cfg.group.rep_charge, lat.d),
        struct.pack(f"<{lat.d}I", *lat.extents),
        struct.pack("<d", lat.h),
        np.ascontiguousarray(cfg.links, dtype="<c16").tobytes(),
        np.ascontiguousarray(cfg.phi, dtype="<c16").tobytes(),
    ]
    return b"".join(parts)


def decode_checkpoint(data: bytes) -> FieldConfig:
    magic, code, charge, d = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError("not a GFLX1 checkpoint")
    offset = _HEADER.size
    extents = struct.unpack_from(f"<{d}I", data, offset)
    offset += 4 * d
    (h,) = struct.unpack_from("<d", data, offset)
    offset += 8
    kind = {v: k for k, v in _GROUP_CODES.items()}[code]
    group = GroupKind(kind, charge)
    lat = LatticeSpec(tuple(extents), h)
    n_links = lat.volume * d * group.n * group.n
    n_phi = lat.volume * group.n
    expected = offset + 16 * (n_links + n_phi)
    if len(data) != expected:
        raise ValueError(f"checkpoint has {len(data)} bytes, expected {expected}")
    links = np.frombuffer(data, "<c16", n_links, offset).reshape(lat.volume, d, group.n, group.n)
    phi = np.frombuffer(data, "<c16", n_phi, offset + 16 * n_links).reshape(lat.volume, group.n)
    return FieldConfig(lat, group, links.astype(complex), phi.astype(complex))


def save_checkpoint(path, cfg: FieldConfig):
    atomic_write(path, encode_checkpoint(cfg))


def load_checkpoint(path) -> FieldConfig:
    return decode_checkpoint(Path(path).read_bytes())


# --- JSON -----------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    """Stable JSON: sorted keys, fixed indentation, non-finite floats as null."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    atomic_write(path, dumps(obj))


# --- randomness -----------------------------------------------------------

STREAMS = {"start": 1, "gauge": 2, "direction": 3, "verify": 4, "noise": 5}


def generator(seed: int, stream: str | int = 0, index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)`` and positioned at ``index``.

    Distinct ``index`` values give non-overlapping Philox counter ranges, so a
    per-site stream does not depend on the order in which sites are visited.
    """
    sid = STREAMS.get(stream, stream) if isinstance(stream, str) else stream
    key = np.array([seed % 2**64, int(sid)], dtype=np.uint64)
    counter = np.array([0, 0, int(index), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def site_normals(seed: int, stream, volume: int, count: int) -> np.ndarray:
    """Standard normals of shape ``(volume, count)``, one independent stream per site."""
    out = np.empty((volume, count))
    for site in range(volume):
        out[site] = generator(seed, stream, site + 1).standard_normal(count)
    return out
