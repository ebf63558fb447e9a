"""Precision@k evaluation against Best/Valid gold sets, plus the
post-length bucket analysis of rank-1 correctness.

P@k values are reported in percent. Posts with an empty gold set are
excluded from the mean by default (and counted), or forced to zero with
empty_gold="zero" for calibration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .data import AnnotationSet, count_tokens
from .ranking import RankedList

REGIMES = ("best", "valid")

# Inclusive upper bounds on whitespace-token post length; final bucket open.
BUCKET_EDGES = (40, 80, 120, 160, 200)
BUCKET_LABELS = ("1-40", "41-80", "81-120", "121-160", "161-200", "201-300+")


@dataclass
class PrecisionReport:
    regime: str
    p_at: dict[int, float]  # k in 1..5 -> percent
    posts_evaluated: int
    posts_skipped_empty_gold: int


@dataclass
class Bucket:
    label: str
    post_count: int
    correct_at_1: int


@dataclass
class BucketReport:
    regime: str
    buckets: list[Bucket]


def _gold_for(ann: AnnotationSet, regime: str) -> frozenset[str]:
    if regime == "best":
        return ann.best_gold
    if regime == "valid":
        return ann.valid_gold
    raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")


def precision_at_k(ranking: RankedList, gold, k: int) -> float:
    """|top-k ∩ gold| / k (fraction, not percent)."""
    if not 1 <= k <= len(ranking.entries):
        raise ValueError(f"k must be in 1..{len(ranking.entries)}, got {k}")
    hits = sum(1 for e in ranking.entries[:k] if e.candidate_id in gold)
    return hits / k


def evaluate(
    rankings: list[RankedList],
    annotations: dict[str, AnnotationSet],
    regime: str,
    empty_gold: str = "skip",
    max_k: int = 5,
) -> PrecisionReport:
    """Mean per-post P@k over k = 1..max_k, in percent."""
    if empty_gold not in ("skip", "zero"):
        raise ValueError(f"empty_gold must be 'skip' or 'zero', got {empty_gold!r}")
    sums = {k: 0.0 for k in range(1, max_k + 1)}
    evaluated = 0
    skipped = 0
    for rl in rankings:
        if rl.post_id not in annotations:
            raise KeyError(f"no annotation for ranked post {rl.post_id!r}")
        gold = _gold_for(annotations[rl.post_id], regime)
        if not gold and empty_gold == "skip":
            skipped += 1
            continue
        evaluated += 1
        for k in sums:
            sums[k] += precision_at_k(rl, gold, k)
    p_at = {
        k: (100.0 * v / evaluated if evaluated else 0.0) for k, v in sums.items()
    }
    return PrecisionReport(regime, p_at, evaluated, skipped)


def bucket_index(length: int) -> int:
    for i, hi in enumerate(BUCKET_EDGES):
        if length <= hi:
            return i
    return len(BUCKET_EDGES)


def bucket_by_length(
    rankings: list[RankedList],
    annotations: dict[str, AnnotationSet],
    post_texts: dict[str, str],
    regime: str,
    empty_gold: str = "skip",
) -> BucketReport:
    """Assign each evaluated post to a token-length bucket and count rank-1 hits."""
    counts = [0] * len(BUCKET_LABELS)
    correct = [0] * len(BUCKET_LABELS)
    for rl in rankings:
        gold = _gold_for(annotations[rl.post_id], regime)
        if not gold and empty_gold == "skip":
            continue
        length = count_tokens(post_texts[rl.post_id])
        b = bucket_index(length)
        counts[b] += 1
        if rl.entries[0].candidate_id in gold:
            correct[b] += 1
    buckets = [
        Bucket(label, n, c) for label, n, c in zip(BUCKET_LABELS, counts, correct)
    ]
    return BucketReport(regime, buckets)


def emit_report(
    precision_reports: list[PrecisionReport],
    bucket_reports: list[BucketReport],
    out_dir,
    model_tag: str,
) -> list[Path]:
    """Write metrics JSONL and one bucket CSV per bucket report."""
    if not precision_reports and not bucket_reports:
        raise ValueError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if precision_reports:
        metrics_path = out_dir / "metrics.jsonl"
        with open(metrics_path, "w", encoding="utf-8") as f:
            for rep in precision_reports:
                f.write(
                    json.dumps(
                        {
                            "model": model_tag,
                            "regime": rep.regime,
                            "p_at": {str(k): rep.p_at[k] for k in sorted(rep.p_at)},
                            "evaluated": rep.posts_evaluated,
                            "skipped": rep.posts_skipped_empty_gold,
                        }
                    )
                    + "\n"
                )
        written.append(metrics_path)
    for rep in bucket_reports:
        path = out_dir / f"buckets_{rep.regime}.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            w = csv.writer(f)
            w.writerow(["bucket", "total", "correct", "model", "regime"])
            for b in rep.buckets:
                w.writerow([b.label, b.post_count, b.correct_at_1, model_tag, rep.regime])
        written.append(path)
    return written
