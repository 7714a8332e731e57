"""Binary checkpoint container.

Byte layout (all integers little-endian)::

    magic        6 bytes   b"NCELM1"
    version      u32       format version (currently 1)
    meta_len     u64       length of the JSON metadata block
    meta         meta_len  UTF-8 JSON: config echo, vocabulary, rng states,
                           best validation perplexity, free-form extras
    n_tensors    u32
    n_tensors times:
        name_len u16, name (UTF-8)
        ndim     u8,  shape (ndim x u64)
        data     prod(shape) x f64, row-major

Float64 data is stored verbatim, so a reloaded model evaluates bit-for-bit
like the one that was saved.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NCELM1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors, meta):
    """Write named float64 tensors plus a JSON-serialisable ``meta`` dict."""
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype="<f8", order="C")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes(order="C"))
    tmp.replace(path)


def _read(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path):
    """Return ``(tensors, meta)`` from a file written by :func:`save_checkpoint`."""
    with Path(path).open("rb") as fh:
        if _read(fh, len(MAGIC), "magic") != MAGIC:
            raise CheckpointError(f"{path} is not an NCELM1 checkpoint")
        version, meta_len = struct.unpack("<IQ", _read(fh, 12, "header"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        meta = json.loads(_read(fh, meta_len, "metadata").decode("utf-8"))
        (count,) = struct.unpack("<I", _read(fh, 4, "tensor count"))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read(fh, 2, "name length"))
            name = _read(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read(fh, 1, "ndim"))
            shape = struct.unpack(f"<{ndim}Q", _read(fh, 8 * ndim, "shape"))
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(_read(fh, 8 * size, name), dtype="<f8")
            tensors[name] = data.reshape(shape).astype(np.float64)
        if fh.read(1):
            raise CheckpointError("trailing bytes after the last tensor")
    return tensors, meta
