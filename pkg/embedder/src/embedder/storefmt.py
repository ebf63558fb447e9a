"""Writer for the ranking pipeline's binary embedding store.

Layout (little-endian): magic "CQEMB1", u16 version = 1, u32 dim, u64
count, then count records of [u16 key_length][key UTF-8][dim x f32], and a
trailing 8-byte checksum (first 8 bytes of SHA-256 over all prior bytes).
This mirrors the consumer's reader; the two packages share only the bytes.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CQEMB1"
VERSION = 1
_HEADER = struct.Struct("<6sHIQ")


def write_store(entries, dim: int, path) -> str:
    """Write (key, vector) pairs; returns the file's SHA-256 hex digest."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    entries = list(entries)
    body = bytearray(_HEADER.pack(MAGIC, VERSION, dim, len(entries)))
    seen = set()
    for key, vec in entries:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen.add(key)
        arr = np.asarray(vec, dtype="<f4")
        if arr.shape != (dim,):
            raise ValueError(f"key {key!r}: vector shape {arr.shape} != ({dim},)")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"key {key!r}: non-finite values")
        kb = key.encode("utf-8")
        body += struct.pack("<H", len(kb)) + kb + arr.tobytes()
    body += hashlib.sha256(bytes(body)).digest()[:8]
    Path(path).write_bytes(bytes(body))
    return hashlib.sha256(bytes(body)).hexdigest()
