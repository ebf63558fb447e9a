"""Supervised training loop: example assembly, seeded shuffling, batching,
Adam steps on batch-mean loss, per-epoch checkpoints and logging.

Determinism contract: (examples, config) fully determine the final model.
Each epoch reseeds its own generator from (seed, epoch), so resuming from a
checkpoint replays the identical trajectory.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import nn
from .data import CandidateSet
from .ranking import FeatureSpec, features_for_set
from .store import EmbeddingStore


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "pq"  # pq | pqa
    encoder_dim: int = 768
    batch_size: int = 1000
    epochs: int = 50
    learning_rate: float = 0.01
    dropout_rate: float = 0.4
    seed: int = 0
    hidden_dims: tuple[int, int] = (512, 256)
    class_weighting: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def feature_spec(self) -> FeatureSpec:
        return FeatureSpec(self.variant, self.encoder_dim)


def config_digest(config: TrainConfig) -> str:
    blob = json.dumps(asdict(config), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class TrainingExample:
    feature: np.ndarray
    label: int
    post_id: str
    candidate_id: str


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    val_p_at_1: float | None
    seconds: float


@dataclass
class TrainLog:
    seed: int
    config_digest: str
    epochs: list[EpochRecord] = field(default_factory=list)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for rec in self.epochs:
                f.write(json.dumps(asdict(rec)) + "\n")
            f.write(
                json.dumps(
                    {
                        "summary": True,
                        "seed": self.seed,
                        "config_digest": self.config_digest,
                        "epochs": len(self.epochs),
                        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
                    }
                )
                + "\n"
            )


def build_examples(
    candidate_sets: list[CandidateSet],
    store: EmbeddingStore,
    spec: FeatureSpec,
) -> list[TrainingExample]:
    """10 labeled examples per post, deterministic post x candidate order."""
    examples = []
    for cset in candidate_sets:
        feats = features_for_set(spec, cset, store)
        for cand, row in zip(cset.candidates, feats):
            examples.append(TrainingExample(row, cand.label, cset.post_id, cand.cid))
    return examples


def _stack(examples: list[TrainingExample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([ex.feature for ex in examples]).astype(np.float64)
    y = np.array([ex.label for ex in examples], dtype=np.int64)
    return X, y


def _validation_metrics(
    model: nn.MlpModel, examples: list[TrainingExample]
) -> tuple[float, float]:
    """Mean loss and P@1 (top-scored candidate per post is the label-1 one)."""
    X, y = _stack(examples)
    probs, _ = nn.forward(model, X, mode="infer")
    loss = float(np.mean(nn.cross_entropy(probs, y)))
    by_post: dict[str, list[tuple[float, int, int]]] = {}
    for i, ex in enumerate(examples):
        by_post.setdefault(ex.post_id, []).append((float(probs[i, 1]), i, ex.label))
    hits = 0
    for cands in by_post.values():
        # max returns the first maximal element, so ties keep input order
        best = max(cands, key=lambda t: t[0])
        hits += best[2]
    return loss, hits / len(by_post)


def _checkpoint_path(out_dir: Path, epoch: int) -> Path:
    return out_dir / f"epoch_{epoch:04d}.ckpt"


_CKPT_RE = re.compile(r"epoch_(\d+)\.ckpt$")


def train(
    examples: list[TrainingExample],
    config: TrainConfig,
    out_dir=None,
    val_examples: list[TrainingExample] | None = None,
    resume_from=None,
) -> tuple[nn.MlpModel, nn.AdamState, TrainLog]:
    """Train for config.epochs; returns (model, optimizer state, log).

    Checkpoints are written per epoch when out_dir is given. resume_from
    names an epoch checkpoint; training continues from the epoch after it
    with the identical trajectory of an uninterrupted run.
    """
    if not examples:
        raise ValueError("no training examples")
    X, y = _stack(examples)
    input_dim = X.shape[1]
    if input_dim != config.feature_spec.input_dim:
        raise ValueError(
            f"feature dim {input_dim} != {config.variant} spec dim {config.feature_spec.input_dim}"
        )

    start_epoch = 0
    if resume_from is not None:
        m = _CKPT_RE.search(str(resume_from))
        if not m:
            raise ValueError(f"cannot infer epoch from checkpoint name {resume_from!r}")
        start_epoch = int(m.group(1)) + 1
        model, state = nn.load_checkpoint(resume_from)
    else:
        model = nn.init_model(
            input_dim, config.hidden_dims, config.dropout_rate, seed=config.seed
        )
        state = nn.init_adam(model, learning_rate=config.learning_rate)

    weights = None
    if config.class_weighting:
        counts = np.bincount(y, minlength=2)
        per_class = len(y) / (2.0 * np.maximum(counts, 1))
        weights = per_class[y]

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    log = TrainLog(seed=config.seed, config_digest=config_digest(config))
    n = len(examples)
    for epoch in range(start_epoch, config.epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            xb, yb = X[idx], y[idx]
            wb = weights[idx] if weights is not None else None
            probs, cache = nn.forward(model, xb, mode="train", rng=rng)
            losses = nn.cross_entropy(probs, yb)
            if wb is not None:
                losses = losses * wb
            batch_loss = float(np.mean(losses))
            if not np.isfinite(batch_loss):
                raise nn.NumericError(f"non-finite loss at epoch {epoch}, batch {lo // config.batch_size}")
            total += batch_loss * len(idx)
            grads = nn.backward(model, cache, yb, sample_weights=wb)
            nn.adam_step(model, grads, state)
        val_loss = val_p1 = None
        if val_examples:
            val_loss, val_p1 = _validation_metrics(model, val_examples)
        log.epochs.append(
            EpochRecord(epoch, total / n, val_loss, val_p1, time.perf_counter() - t0)
        )
        if out_dir is not None:
            nn.save_checkpoint(model, state, _checkpoint_path(out_dir, epoch))
    return model, state, log


def save_checkpoint(model, state, path) -> None:
    nn.save_checkpoint(model, state, path)


def load_checkpoint(path):
    return nn.load_checkpoint(path)
