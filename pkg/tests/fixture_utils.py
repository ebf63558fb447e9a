"""Deterministic 5-post experiment fixture shared by the CLI tests and the
golden-file generator. Everything is seeded, so rebuilding the fixture in a
fresh directory reproduces identical files."""

import json
from pathlib import Path

import numpy as np

from cqrank import nn
from cqrank.store import write_store

DIM = 768
N_POSTS = 5
SEED = 1234


def build_fixture(root) -> dict:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    posts = []
    entries = []
    for i in range(N_POSTS):
        pid = f"p{i}"
        # varying lengths so the bucket analysis has spread
        length = [10, 50, 100, 180, 260][i]
        post_text = " ".join(f"tok{t}" for t in range(length))
        p = rng.normal(size=DIM)
        entries.append((f"P:{pid}", p.astype(np.float32)))
        gold_index = int(rng.integers(10))
        cands = []
        for j in range(10):
            cid = f"{pid}_c{j}"
            if j == gold_index:
                q = p + 0.1 * rng.normal(size=DIM)
            else:
                q = rng.normal(size=DIM)
            entries.append((f"Q:{cid}", q.astype(np.float32)))
            entries.append((f"A:{cid}", rng.normal(size=DIM).astype(np.float32)))
            cands.append(
                {
                    "cid": cid,
                    "question": f"question {j} about post {i}",
                    "answer": f"answer {j}",
                    "label": 1 if j == gold_index else 0,
                }
            )
        posts.append(
            {"post_id": pid, "post": post_text, "gold_index": gold_index, "cands": cands}
        )

    def dump(path, objs):
        with open(path, "w", encoding="utf-8") as f:
            for o in objs:
                f.write(json.dumps(o, ensure_ascii=False) + "\n")

    dump(root / "train.jsonl", [{"post_id": p["post_id"], "candidates": p["cands"]} for p in posts])
    dump(root / "test.jsonl", [{"post_id": p["post_id"], "candidates": p["cands"]} for p in posts])
    dump(
        root / "test_triples.jsonl",
        [
            {
                "post_id": p["post_id"],
                "post": p["post"],
                "question": p["cands"][p["gold_index"]]["question"],
                "answer": p["cands"][p["gold_index"]]["answer"],
            }
            for p in posts
        ],
    )
    # gold: best = original question; valid = original + one neighbor
    anns = []
    for p in posts:
        gold_cid = p["cands"][p["gold_index"]]["cid"]
        other = p["cands"][(p["gold_index"] + 1) % 10]["cid"]
        anns.append({"post_id": p["post_id"], "best": [gold_cid], "valid": [gold_cid, other]})
    dump(root / "annotations.jsonl", anns)

    write_store(entries, DIM, root / "store.bin")

    model = nn.init_model(2 * DIM, (16, 8), dropout_rate=0.0, seed=0)
    state = nn.init_adam(model)
    nn.save_checkpoint(model, state, root / "toy.ckpt")

    (root / "config.toml").write_text(
        "\n".join(
            [
                "[paths]",
                'train = "train.jsonl"',
                'test = "test.jsonl"',
                'test_triples = "test_triples.jsonl"',
                'annotations = "annotations.jsonl"',
                'store = "store.bin"',
                'checkpoint = "toy.ckpt"',
                'out = "out"',
                "",
                "[model]",
                'variant = "pq"',
                "hidden_dims = [16, 8]",
                "",
                "[train]",
                "batch_size = 50",
                "epochs = 1",
                "seed = 0",
                "",
            ]
        )
    )
    return {"root": root, "posts": posts}
