"""Batch extraction: (key, text) pairs -> binary embedding store."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .storefmt import write_store


def extract(texts, encoder, out_path, include_padding: bool = False) -> str:
    """Encode every (key, text) pair and write the store; returns its digest.

    Texts the encoder cannot tokenize fall back to the padding token and are
    flagged in "<out_path>.warnings.jsonl". A provenance sidecar records the
    encoder's model tag.
    """
    from .encoders import encode_text

    texts = list(texts)
    if not texts:
        raise ValueError("no texts to extract")
    entries = []
    warnings = []
    for key, text in texts:
        vec, fell_back = encode_text(encoder, text, include_padding)
        entries.append((key, np.asarray(vec, dtype=np.float32)))
        if fell_back:
            warnings.append({"key": key, "reason": "empty text encoded as padding token"})
    digest = write_store(entries, encoder.spec.dim, out_path)
    Path(str(out_path) + ".meta.json").write_text(
        json.dumps({"model": encoder.spec.model_tag}) + "\n", encoding="utf-8"
    )
    if warnings:
        with open(str(out_path) + ".warnings.jsonl", "w", encoding="utf-8") as f:
            for w in warnings:
                f.write(json.dumps(w) + "\n")
    return digest


def read_text_file(path) -> list[tuple[str, str]]:
    """Input JSONL: one {"key": str, "text": str} object per line."""
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "key" not in obj or "text" not in obj:
                raise ValueError(f"{path}: line {lineno}: need 'key' and 'text' fields")
            pairs.append((obj["key"], obj["text"]))
    return pairs
