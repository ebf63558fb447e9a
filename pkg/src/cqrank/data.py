"""Dataset loading and validation.

Three JSONL file kinds, all UTF-8 with LF line endings (BOM rejected):

  triples:        {"post_id": str, "post": str, "question": str, "answer": str}
  candidate sets: {"post_id": str, "candidates": [{"cid": str, "question": str,
                   "answer": str, "label": 0|1} x 10]}
  annotations:    {"post_id": str, "best": [cid...], "valid": [cid...]}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

N_CANDIDATES = 10


class ParseError(ValueError):
    """A line of an input file is not well-formed."""


class ValidationError(ValueError):
    """A well-formed record violates a dataset invariant."""


@dataclass(frozen=True)
class TripleRecord:
    post_id: str
    post_text: str
    question_text: str
    answer_text: str


@dataclass(frozen=True)
class Candidate:
    cid: str
    question_text: str
    answer_text: str
    label: int


@dataclass(frozen=True)
class CandidateSet:
    post_id: str
    candidates: tuple[Candidate, ...]


@dataclass(frozen=True)
class AnnotationSet:
    post_id: str
    best_gold: frozenset[str]
    valid_gold: frozenset[str]


@dataclass
class SplitManifest:
    split_name: str
    record_count: int
    file_digest: str
    empty_gold_posts: list[str] = field(default_factory=list)


def count_tokens(text: str) -> int:
    """Number of whitespace-delimited tokens in ``text``."""
    return len(text.split())


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _iter_jsonl(path: Path):
    """Yield (line_number, parsed_object) for each non-empty line."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if lineno == 1 and line.startswith("\ufeff"):
                raise ParseError(f"{path}: BOM not allowed")
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: line {lineno}: {e.msg}") from e
            if not isinstance(obj, dict):
                raise ParseError(f"{path}: line {lineno}: expected a JSON object")
            yield lineno, obj


def _require_str(obj: dict, key: str, path: Path, lineno: int) -> str:
    val = obj.get(key)
    if not isinstance(val, str):
        raise ParseError(f"{path}: line {lineno}: missing or non-string field {key!r}")
    return val


def load_triples(path) -> tuple[list[TripleRecord], SplitManifest]:
    """Load a triples file; order preserved, post_ids unique."""
    path = Path(path)
    records: list[TripleRecord] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        rec = TripleRecord(
            post_id=_require_str(obj, "post_id", path, lineno),
            post_text=_require_str(obj, "post", path, lineno),
            question_text=_require_str(obj, "question", path, lineno),
            answer_text=_require_str(obj, "answer", path, lineno),
        )
        if not rec.post_id:
            raise ValidationError(f"{path}: line {lineno}: empty post_id")
        if rec.post_id in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate post_id {rec.post_id!r}")
        if not rec.post_text or not rec.question_text:
            raise ValidationError(f"{path}: line {lineno}: empty post or question text")
        seen.add(rec.post_id)
        records.append(rec)
    manifest = SplitManifest("triples", len(records), _file_digest(path))
    return records, manifest


def load_candidate_sets(path, split: str) -> tuple[list[CandidateSet], SplitManifest]:
    """Load a candidate-set file.

    For the train/validation splits, each set must carry exactly one label-1
    candidate (the post's original question). The test split's labels are not
    constrained; its ground truth lives in the annotation file.
    """
    if split not in ("train", "validation", "test"):
        raise ValueError(f"unknown split {split!r}")
    path = Path(path)
    sets: list[CandidateSet] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        post_id = _require_str(obj, "post_id", path, lineno)
        raw = obj.get("candidates")
        if not isinstance(raw, list):
            raise ParseError(f"{path}: line {lineno}: missing candidates list")
        if len(raw) != N_CANDIDATES:
            raise ValidationError(
                f"{path}: line {lineno}: expected {N_CANDIDATES} candidates, got {len(raw)}"
            )
        cands = []
        for entry in raw:
            if not isinstance(entry, dict):
                raise ParseError(f"{path}: line {lineno}: candidate is not an object")
            label = entry.get("label")
            if label not in (0, 1):
                raise ValidationError(f"{path}: line {lineno}: label must be 0 or 1")
            cands.append(
                Candidate(
                    cid=_require_str(entry, "cid", path, lineno),
                    question_text=_require_str(entry, "question", path, lineno),
                    answer_text=_require_str(entry, "answer", path, lineno),
                    label=label,
                )
            )
        cids = [c.cid for c in cands]
        if len(set(cids)) != len(cids):
            raise ValidationError(f"{path}: line {lineno}: duplicate candidate ids")
        if split in ("train", "validation"):
            positives = sum(c.label for c in cands)
            if positives != 1:
                raise ValidationError(
                    f"{path}: line {lineno}: {split} set must have exactly one "
                    f"label-1 candidate, got {positives}"
                )
        if not post_id:
            raise ValidationError(f"{path}: line {lineno}: empty post_id")
        if post_id in seen:
            raise ValidationError(f"{path}: line {lineno}: duplicate post_id {post_id!r}")
        seen.add(post_id)
        sets.append(CandidateSet(post_id=post_id, candidates=tuple(cands)))
    manifest = SplitManifest(split, len(sets), _file_digest(path))
    return sets, manifest


def load_annotations(
    path, candidate_sets: list[CandidateSet]
) -> tuple[dict[str, AnnotationSet], SplitManifest]:
    """Load aggregated Best/Valid gold sets, validated against candidate sets.

    Every gold candidate id must belong to its post's candidate list. Posts
    whose valid_gold is empty are recorded in the manifest (the intersection
    over annotators can vanish).
    """
    path = Path(path)
    by_post = {cs.post_id: {c.cid for c in cs.candidates} for cs in candidate_sets}
    annotations: dict[str, AnnotationSet] = {}
    empty_gold: list[str] = []
    for lineno, obj in _iter_jsonl(path):
        post_id = _require_str(obj, "post_id", path, lineno)
        if post_id not in by_post:
            raise ValidationError(
                f"{path}: line {lineno}: post_id {post_id!r} has no candidate set"
            )
        if post_id in annotations:
            raise ValidationError(f"{path}: line {lineno}: duplicate post_id {post_id!r}")
        known = by_post[post_id]
        golds = {}
        for key in ("best", "valid"):
            raw = obj.get(key)
            if not isinstance(raw, list) or not all(isinstance(c, str) for c in raw):
                raise ParseError(f"{path}: line {lineno}: missing or malformed {key!r} list")
            unknown = set(raw) - known
            if unknown:
                raise ValidationError(
                    f"{path}: line {lineno}: {key} ids not in candidate set: {sorted(unknown)}"
                )
            golds[key] = frozenset(raw)
        if not golds["valid"]:
            empty_gold.append(post_id)
        annotations[post_id] = AnnotationSet(post_id, golds["best"], golds["valid"])
    manifest = SplitManifest("annotations", len(annotations), _file_digest(path))
    manifest.empty_gold_posts = empty_gold
    return annotations, manifest


def write_triples(records: list[TripleRecord], path) -> None:
    """Serialize triples back to JSONL (inverse of load_triples)."""
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(
                json.dumps(
                    {
                        "post_id": r.post_id,
                        "post": r.post_text,
                        "question": r.question_text,
                        "answer": r.answer_text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def write_candidate_sets(sets: list[CandidateSet], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for cs in sets:
            f.write(
                json.dumps(
                    {
                        "post_id": cs.post_id,
                        "candidates": [
                            {
                                "cid": c.cid,
                                "question": c.question_text,
                                "answer": c.answer_text,
                                "label": c.label,
                            }
                            for c in cs.candidates
                        ],
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
