"""Flat binary tensor container shared by front-end and CRNN checkpoints.

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON
header, then the raw little-endian float64 tensor buffers concatenated in
header order. The header carries tensor names/shapes plus a free-form
``meta`` record (mode, learn flags, N, M, sample rate, classifier config,
class labels). Byte output is deterministic for identical content.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataFormatError

MAGIC = b"SEDCKPT\x01"
VERSION = 1


def save_checkpoint(path, tensors, meta):
    """Write named float64 arrays plus a JSON-serializable meta record."""
    names = list(tensors)
    header = {
        "version": VERSION,
        "meta": meta,
        "tensors": [
            {"name": name, "shape": list(np.asarray(tensors[name]).shape)}
            for name in names
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())
    return Path(path)


def load_checkpoint(path):
    """Read back (tensors, meta); raises DataFormatError on corruption."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint file (bad magic)")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    try:
        header = json.loads(raw[start : start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise DataFormatError(f"{path}: corrupt header ({err})") from None
    if header.get("version") != VERSION:
        raise DataFormatError(
            f"{path}: unsupported checkpoint version {header.get('version')}"
        )
    tensors = {}
    offset = start + hlen
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw):
            raise DataFormatError(f"{path}: truncated tensor '{entry['name']}'")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        offset += nbytes
    return tensors, header["meta"]
