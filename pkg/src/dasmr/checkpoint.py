"""Versioned binary checkpoint container.

Layout: 8-byte magic, u32 format version, u64 manifest length, UTF-8 JSON
manifest, then the raw little-endian array payloads in manifest order.
"""
from __future__ import annotations

import json
import os
import struct

import numpy as np

MAGIC = b"DASMRCKP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQ")


class CheckpointError(ValueError):
    pass


def dumps(meta: dict, arrays: dict) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        a = a.astype(a.dtype.newbyteorder("<"), copy=False)
        raw = a.tobytes()
        entries.append({"name": name, "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset,
                        "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    manifest = json.dumps({"meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":")).encode()
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest)) + manifest + b"".join(chunks)


def loads(data: bytes) -> tuple[dict, dict]:
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, mlen = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version} != supported {FORMAT_VERSION}")
    start = _HEADER.size
    manifest = json.loads(data[start:start + mlen].decode())
    payload = memoryview(data)[start + mlen:]
    arrays = {}
    for e in manifest["arrays"]:
        end = e["offset"] + e["nbytes"]
        if end > len(payload):
            raise CheckpointError(f"truncated payload for array {e['name']}")
        arr = np.frombuffer(payload[e["offset"]:end], dtype=np.dtype(e["dtype"])).reshape(e["shape"])
        arrays[e["name"]] = arr.astype(arr.dtype.newbyteorder("="))
    return manifest["meta"], arrays


def save(path, meta: dict, arrays: dict) -> None:
    """Write atomically: a failed write leaves any previous file at ``path`` intact."""
    data = dumps(meta, arrays)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def load(path) -> tuple[dict, dict]:
    with open(path, "rb") as f:
        return loads(f.read())
