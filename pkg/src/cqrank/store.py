"""Binary on-disk embedding store and remote embedding-service client.

File layout (little-endian):

  magic "CQEMB1" (6 bytes)
  u16  version = 1
  u32  dim
  u64  count
  count records of [u16 key_length][key bytes, UTF-8][dim x f32]
  8-byte checksum (first 8 bytes of SHA-256 over all prior bytes)

Keys are role-prefixed: "P:<post_id>", "Q:<cid>", "A:<cid>". One store holds
every vector for one encoder variant. The layout has no provenance field, so
the model tag lives in an optional sidecar "<path>.meta.json".
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from pathlib import Path

import numpy as np
import requests

MAGIC = b"CQEMB1"
VERSION = 1
_HEADER = struct.Struct("<6sHIQ")


class StoreFormatError(ValueError):
    """The file is not a valid embedding store."""


class MissingKeyError(KeyError):
    """A requested embedding key is absent from the store."""


def _checksum(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()[:8]


class EmbeddingStore:
    """Read-only map from role-prefixed key to a float32 vector."""

    def __init__(self, dim: int, entries: dict[str, np.ndarray], provenance: str = ""):
        self.dim = dim
        self._entries = entries
        self.provenance = provenance

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self):
        return self._entries.keys()

    def lookup(self, key: str) -> np.ndarray:
        try:
            return self._entries[key]
        except KeyError:
            role = key.split(":", 1)[0] if ":" in key else "?"
            raise MissingKeyError(
                f"no embedding for key {key!r} (role {role!r}) in store of {len(self)} entries"
            ) from None


def lookup(store: EmbeddingStore, key: str) -> np.ndarray:
    return store.lookup(key)


def write_store(entries, dim: int, path, provenance: str = "") -> str:
    """Write (key, vector) pairs to ``path``; returns the file's SHA-256 hex digest.

    Vectors must all have length ``dim`` and finite entries; duplicate keys
    are rejected.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    entries = list(entries)
    seen: set[str] = set()
    body = bytearray(_HEADER.pack(MAGIC, VERSION, dim, len(entries)))
    for key, vec in entries:
        if key in seen:
            raise ValueError(f"duplicate key {key!r}")
        seen.add(key)
        arr = np.asarray(vec, dtype=np.float32)
        if arr.shape != (dim,):
            raise ValueError(f"key {key!r}: vector shape {arr.shape} != ({dim},)")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"key {key!r}: non-finite values")
        kb = key.encode("utf-8")
        if len(kb) > 0xFFFF:
            raise ValueError(f"key {key!r} too long")
        body += struct.pack("<H", len(kb)) + kb + arr.tobytes()
    body += _checksum(bytes(body))
    path = Path(path)
    path.write_bytes(bytes(body))
    if provenance:
        Path(str(path) + ".meta.json").write_text(
            json.dumps({"model": provenance}) + "\n", encoding="utf-8"
        )
    return hashlib.sha256(bytes(body)).hexdigest()


def open_store(path) -> EmbeddingStore:
    """Open and fully index a store file; validates magic, version and checksum."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size + 8:
        raise StoreFormatError(f"{path}: truncated at byte {len(data)} (header incomplete)")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise StoreFormatError(f"{path}: not an embedding store (bad magic {magic!r})")
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if dim <= 0:
        raise StoreFormatError(f"{path}: invalid dim {dim}")
    entries: dict[str, np.ndarray] = {}
    off = _HEADER.size
    end = len(data) - 8
    vec_bytes = 4 * dim
    for _ in range(count):
        if off + 2 > end:
            raise StoreFormatError(f"{path}: truncated at byte {off}")
        (klen,) = struct.unpack_from("<H", data, off)
        off += 2
        if off + klen + vec_bytes > end:
            raise StoreFormatError(f"{path}: truncated at byte {off}")
        key = data[off : off + klen].decode("utf-8")
        off += klen
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off).copy()
        off += vec_bytes
        if key in entries:
            raise StoreFormatError(f"{path}: duplicate key {key!r}")
        entries[key] = vec
    if off != end:
        raise StoreFormatError(f"{path}: {end - off} trailing bytes after last record")
    if _checksum(data[:-8]) != data[-8:]:
        raise StoreFormatError(f"{path}: checksum mismatch")
    provenance = ""
    meta = Path(str(path) + ".meta.json")
    if meta.exists():
        provenance = json.loads(meta.read_text(encoding="utf-8")).get("model", "")
    return EmbeddingStore(dim, entries, provenance)


def fetch_remote(
    endpoint: str,
    texts: list[str],
    timeout: float = 60.0,
    max_retries: int = 3,
    expected_dim: int | None = None,
) -> list[np.ndarray]:
    """Embed ``texts`` via the remote service's POST /embed, order-preserving.

    Transport failures are retried up to ``max_retries`` times; a dim that
    disagrees with ``expected_dim`` is a hard error (no retry).
    """
    if not texts:
        raise ValueError("empty batch")
    url = endpoint.rstrip("/") + "/embed"
    last_err: Exception | None = None
    for attempt in range(max_retries):
        try:
            resp = requests.post(url, json={"texts": texts}, timeout=timeout)
            if resp.status_code >= 500:
                raise requests.HTTPError(f"server error {resp.status_code}")
            resp.raise_for_status()
            payload = resp.json()
            break
        except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as e:
            last_err = e
            if attempt + 1 < max_retries:
                time.sleep(0.2 * (attempt + 1))
    else:
        raise ConnectionError(f"embedding service at {url} unreachable: {last_err}")
    dim = payload.get("dim")
    vectors = payload.get("vectors")
    if not isinstance(dim, int) or not isinstance(vectors, list):
        raise ValueError(f"malformed response from {url}")
    if expected_dim is not None and dim != expected_dim:
        raise ValueError(f"service dim {dim} disagrees with expected dim {expected_dim}")
    if len(vectors) != len(texts):
        raise ValueError(f"service returned {len(vectors)} vectors for {len(texts)} texts")
    out = []
    for i, v in enumerate(vectors):
        arr = np.asarray(v, dtype=np.float32)
        if arr.shape != (dim,):
            raise ValueError(f"vector {i} has length {arr.size}, expected {dim}")
        out.append(arr)
    return out


def service_info(endpoint: str, timeout: float = 10.0) -> dict:
    """GET /info: {"dim": int, "model": str}."""
    resp = requests.get(endpoint.rstrip("/") + "/info", timeout=timeout)
    resp.raise_for_status()
    return resp.json()
