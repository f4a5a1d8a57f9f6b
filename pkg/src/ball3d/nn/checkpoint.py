"""Versioned binary weight checkpoints.

Layout: magic ``B3DW`` | u32 version | u64 header length | header JSON |
concatenated little-endian float64 buffers. The header lists every tensor
(name, shape, offset) in sorted name order plus a free-form ``meta`` dict,
so files are byte-deterministic for identical contents.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import MalformedRecord, SchemaVersionMismatch, ShapeMismatch

MAGIC = b"B3DW"
VERSION = 1


def save_weights(path, named_arrays, meta=None):
    items = sorted((name, np.asarray(a, dtype=np.float64)) for name, a in named_arrays)
    tensors = []
    offset = 0
    for name, a in items:
        tensors.append({"name": name, "shape": list(a.shape), "offset": offset})
        offset += a.size * 8
    header = json.dumps(
        {"tensors": tensors, "meta": meta or {}}, sort_keys=True, allow_nan=False
    ).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        for _, a in items:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_weights(path):
    """Returns (dict name -> ndarray, meta dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise MalformedRecord(f"{path} is not a weight checkpoint")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != VERSION:
        raise SchemaVersionMismatch(f"checkpoint version {version}, expected {VERSION}")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + hlen].decode())
    base = 16 + hlen
    out = {}
    for rec in header["tensors"]:
        shape = tuple(rec["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = base + rec["offset"]
        a = np.frombuffer(blob, dtype="<f8", count=n, offset=start)
        out[rec["name"]] = a.reshape(shape).astype(np.float64)
    return out, header.get("meta", {})


def restore_into(named_params, arrays):
    """Copy checkpoint arrays into existing parameter tensors; rejects
    missing names and shape mismatches."""
    for name, p in named_params:
        if name not in arrays:
            raise ShapeMismatch(f"checkpoint is missing parameter {name}")
        a = arrays[name]
        if a.shape != p.data.shape:
            raise ShapeMismatch(
                f"{name}: checkpoint shape {a.shape} != model shape {p.data.shape}"
            )
        p.data[...] = a
