"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    magic      8 bytes   b"AMECKPT\\0"
    version    u32       currently 1
    header_len u32
    header     header_len bytes of UTF-8 JSON (config: d, F, vulnerability, variant, ...)
    count      u32       number of tensors
    count times:
        name_len u32, name (UTF-8)
        ndim     u32, ndim x u64 dims
        data     prod(dims) x float64 little-endian, C order
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"AMECKPT\0"
VERSION = 1


class LoadError(ValueError):
    pass


def dumps(header: dict, tensors: dict) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION)]
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    parts += [struct.pack("<I", len(hdr)), hdr, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts += [struct.pack("<I", len(raw)), raw, struct.pack("<I", arr.ndim)]
        parts += [struct.pack(f"<{arr.ndim}Q", *arr.shape), arr.tobytes(order="C")]
    return b"".join(parts)


def loads(blob: bytes) -> tuple[dict, dict]:
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise LoadError("truncated checkpoint")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(8)) != MAGIC:
        raise LoadError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise LoadError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<I", take(4))
    try:
        header = json.loads(bytes(take(hlen)).decode("utf-8"))
    except ValueError as exc:
        raise LoadError(f"corrupt header: {exc}") from None
    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = bytes(take(nlen)).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        tensors[name] = np.frombuffer(bytes(take(8 * n)), dtype="<f8").reshape(shape).astype(np.float64)
    if pos != len(view):
        raise LoadError("trailing bytes after last tensor")
    return header, tensors


def save(path, header: dict, tensors: dict) -> str:
    """Write a checkpoint and return its sha256 hex digest."""
    blob = dumps(header, tensors)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load(path) -> tuple[dict, dict, str]:
    blob = Path(path).read_bytes()
    header, tensors = loads(blob)
    return header, tensors, hashlib.sha256(blob).hexdigest()
