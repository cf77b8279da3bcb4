"""Versioned binary container for named tensors.

Layout (all integers little-endian):

    magic   8 bytes  b"SCPTCKPT"
    u32     format version (1)
    u32     header length
    bytes   canonical JSON header (sorted keys, compact separators)
    u32     tensor count
    per tensor:
        u16     name length, then UTF-8 name
        u8      ndim
        u32*ndim dims
        f32*prod(dims) data, little-endian

Round trips are byte-exact: loading a file and saving the result reproduces
the original bytes.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"SCPTCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _canonical_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_tensors(path, header: dict, named: list[tuple[str, np.ndarray]]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", FORMAT_VERSION)
    hb = _canonical_header(header)
    blob += struct.pack("<I", len(hb))
    blob += hb
    blob += struct.pack("<I", len(named))
    for name, arr in named:
        nb = name.encode("utf-8")
        blob += struct.pack("<H", len(nb))
        blob += nb
        arr32 = np.ascontiguousarray(arr, dtype="<f4")
        blob += struct.pack("<B", arr32.ndim)
        for d in arr32.shape:
            blob += struct.pack("<I", d)
        blob += arr32.tobytes()
    with open(path, "wb") as f:
        f.write(bytes(blob))


def load_tensors(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    pos = 8
    (version,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    header = json.loads(blob[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).reshape(shape)
        pos += 4 * size
        tensors[name] = arr.copy()
    if pos != len(blob):
        raise CheckpointError("trailing bytes after last tensor")
    return header, tensors
