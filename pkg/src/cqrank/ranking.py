"""Feature assembly, candidate scoring and deterministic ranking.

Feature vectors concatenate embeddings in fixed P, Q(, A) order. Scores are
class-1 softmax probabilities from an inference-mode forward pass; ranking
is a stable descending sort, ties resolved by original candidate order.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import CandidateSet
from .nn import MlpModel, forward
from .store import EmbeddingStore

VARIANTS = ("pq", "pqa")


@dataclass(frozen=True)
class FeatureSpec:
    variant: str  # "pq" | "pqa"
    encoder_dim: int  # 768 or 1024 for the real encoders

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.encoder_dim <= 0:
            raise ValueError(f"encoder_dim must be positive, got {self.encoder_dim}")

    @property
    def uses_answer(self) -> bool:
        return self.variant == "pqa"

    @property
    def input_dim(self) -> int:
        return (3 if self.uses_answer else 2) * self.encoder_dim


@dataclass(frozen=True)
class RankedEntry:
    candidate_id: str
    score: float
    original_index: int


@dataclass(frozen=True)
class RankedList:
    post_id: str
    entries: tuple[RankedEntry, ...]


def assemble_feature(
    spec: FeatureSpec,
    post_vec: np.ndarray,
    question_vec: np.ndarray,
    answer_vec: np.ndarray | None = None,
) -> np.ndarray:
    """Concatenate [P ‖ Q] or [P ‖ Q ‖ A] into one float64 input vector."""
    parts = [post_vec, question_vec]
    if spec.uses_answer:
        if answer_vec is None:
            raise ValueError("pqa variant requires an answer vector")
        parts.append(answer_vec)
    elif answer_vec is not None:
        raise ValueError("pq variant takes no answer vector")
    for name, v in zip("PQA", parts):
        if np.asarray(v).shape != (spec.encoder_dim,):
            raise ValueError(
                f"{name} vector has shape {np.asarray(v).shape}, expected ({spec.encoder_dim},)"
            )
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


def features_for_set(spec: FeatureSpec, cset: CandidateSet, store: EmbeddingStore) -> np.ndarray:
    """Feature matrix [10, input_dim] for a post's candidates, input order."""
    p = store.lookup(f"P:{cset.post_id}")
    rows = []
    for cand in cset.candidates:
        q = store.lookup(f"Q:{cand.cid}")
        a = store.lookup(f"A:{cand.cid}") if spec.uses_answer else None
        rows.append(assemble_feature(spec, p, q, a))
    return np.stack(rows)


def score_candidates(
    model: MlpModel, cset: CandidateSet, store: EmbeddingStore, spec: FeatureSpec
) -> list[tuple[str, float]]:
    """Class-1 probability per candidate, dropout off, input order preserved."""
    if model.input_dim != spec.input_dim:
        raise ValueError(f"model input_dim {model.input_dim} != spec input_dim {spec.input_dim}")
    feats = features_for_set(spec, cset, store)
    probs, _ = forward(model, feats, mode="infer")
    return [(c.cid, float(p)) for c, p in zip(cset.candidates, probs[:, 1])]


def rank(post_id: str, scores: list[tuple[str, float]]) -> RankedList:
    """Stable sort by descending score; exact ties keep original order."""
    for cid, s in scores:
        if not math.isfinite(s):
            raise ValueError(f"non-finite score for candidate {cid!r}")
    indexed = [RankedEntry(cid, s, i) for i, (cid, s) in enumerate(scores)]
    ordered = sorted(indexed, key=lambda e: -e.score)
    return RankedList(post_id, tuple(ordered))


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("CQRANK_THREADS", "1")))
    except ValueError:
        return 1


def rank_candidate_sets(
    model: MlpModel,
    csets: list[CandidateSet],
    store: EmbeddingStore,
    spec: FeatureSpec,
) -> list[RankedList]:
    """Score and rank every post; results in post order regardless of workers."""

    def one(cset: CandidateSet) -> RankedList:
        return rank(cset.post_id, score_candidates(model, cset, store, spec))

    workers = _worker_count()
    if workers == 1:
        return [one(cs) for cs in csets]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, csets))


def write_rankings(rankings: list[RankedList], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rl in rankings:
            obj = {
                "post_id": rl.post_id,
                "ranking": [{"cid": e.candidate_id, "score": e.score} for e in rl.entries],
            }
            f.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_rankings(path) -> list[RankedList]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            entries = tuple(
                RankedEntry(e["cid"], float(e["score"]), i)
                for i, e in enumerate(obj["ranking"])
            )
            out.append(RankedList(obj["post_id"], entries))
    return out
