"""Sentence encoders producing mean-pooled fixed-size vectors.

An encoder exposes token_vectors(text) -> (tokens [n, dim], mask [n]); the
pooled sentence vector is the mask-weighted arithmetic mean of the token
rows. Padding positions carry mask 0 and are excluded from the mean by
default (include_padding=True averages over every row instead).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EncoderSpec:
    model_tag: str
    dim: int

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")


def mean_pool(tokens: np.ndarray, mask: np.ndarray, include_padding: bool = False) -> np.ndarray:
    """Column-wise mean of token vectors, weighted by the attention mask."""
    tokens = np.asarray(tokens, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if tokens.ndim != 2:
        raise ValueError(f"token matrix must be 2-d, got shape {tokens.shape}")
    if mask.shape != (tokens.shape[0],):
        raise ValueError(f"mask shape {mask.shape} does not match {tokens.shape[0]} tokens")
    if include_padding:
        mask = np.ones_like(mask)
    total = mask.sum()
    if total == 0:
        raise ValueError("no unmasked tokens to pool")
    return (tokens * mask[:, None]).sum(axis=0) / total


class StubEncoder:
    """Deterministic hash-based encoder for tests and offline fixtures.

    Each whitespace token maps to a fixed pseudo-random vector derived from
    its bytes, so identical texts always produce identical embeddings. An
    empty text yields zero tokens, mimicking a tokenizer that emits nothing.
    """

    def __init__(self, dim: int = 768, model_tag: str = "stub-encoder"):
        self.spec = EncoderSpec(model_tag, dim)

    def token_vectors(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        words = text.split()
        if not words:
            return np.zeros((0, self.spec.dim)), np.zeros(0)
        rows = []
        for w in words:
            seed = int.from_bytes(hashlib.sha256(w.encode()).digest()[:8], "little")
            rows.append(np.random.default_rng(seed).normal(size=self.spec.dim))
        return np.stack(rows), np.ones(len(words))

    def padding_token(self) -> np.ndarray:
        return np.zeros(self.spec.dim)


class FixedEncoder:
    """Encoder over explicitly supplied token matrices (pooling oracle tests)."""

    def __init__(self, table: dict, dim: int, model_tag: str = "fixed-encoder"):
        self.table = table
        self.spec = EncoderSpec(model_tag, dim)

    def token_vectors(self, text: str):
        tokens = np.asarray(self.table[text], dtype=np.float64)
        return tokens, np.ones(tokens.shape[0])

    def padding_token(self) -> np.ndarray:
        return np.zeros(self.spec.dim)


class TransformerEncoder:
    """Pre-trained NLI sentence encoder via transformers (optional extra).

    Texts pass through the model's own tokenizer untouched, truncated at the
    model's max sequence length; the final hidden layer is pooled here.
    """

    def __init__(self, model_tag: str, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as e:
            raise RuntimeError(
                "transformers/torch are required for real encoders; "
                "install the 'encoders' extra"
            ) from e
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_tag)
        self.model = AutoModel.from_pretrained(model_tag).to(device).eval()
        self.device = device
        self.spec = EncoderSpec(model_tag, int(self.model.config.hidden_size))

    def token_vectors(self, text: str):
        torch = self._torch
        enc = self.tokenizer(text, truncation=True, return_tensors="pt").to(self.device)
        with torch.no_grad():
            out = self.model(**enc)
        tokens = out.last_hidden_state[0].cpu().numpy().astype(np.float64)
        mask = enc["attention_mask"][0].cpu().numpy().astype(np.float64)
        return tokens, mask

    def padding_token(self) -> np.ndarray:
        torch = self._torch
        pad_id = self.tokenizer.pad_token_id or 0
        ids = torch.tensor([[pad_id]], device=self.device)
        with torch.no_grad():
            out = self.model(input_ids=ids)
        return out.last_hidden_state[0, 0].cpu().numpy().astype(np.float64)


def encode_text(encoder, text: str, include_padding: bool = False) -> tuple[np.ndarray, bool]:
    """Pooled vector for one text; returns (vector, used_padding_fallback).

    A text the encoder reduces to zero tokens is replaced by its single
    padding token so every key still gets a vector.
    """
    tokens, mask = encoder.token_vectors(text)
    if tokens.shape[0] == 0 or (not include_padding and mask.sum() == 0):
        return np.asarray(encoder.padding_token(), dtype=np.float64), True
    return mean_pool(tokens, mask, include_padding), False


def load_encoder(model_tag: str, dim: int = 768):
    if model_tag == "stub":
        return StubEncoder(dim=dim)
    return TransformerEncoder(model_tag)
