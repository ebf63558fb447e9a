import numpy as np
import pytest

from cqrank.data import Candidate, CandidateSet


def make_candidate_set(post_id: str, gold_index: int = 0, n: int = 10) -> CandidateSet:
    cands = tuple(
        Candidate(
            cid=f"{post_id}_c{j}",
            question_text=f"question {j} for {post_id}",
            answer_text=f"answer {j} for {post_id}",
            label=1 if j == gold_index else 0,
        )
        for j in range(n)
    )
    return CandidateSet(post_id=post_id, candidates=cands)


def synth_corpus(n_posts: int, dim: int, seed: int, noise: float = 0.1):
    """Geometric synthetic task: the gold question vector is the post vector
    plus Gaussian noise, the 9 distractors are i.i.d. Gaussian.

    Returns (candidate_sets, store_entries). Answer vectors are random so PQA
    variants can run too.
    """
    rng = np.random.default_rng(seed)
    csets = []
    entries = []
    for i in range(n_posts):
        post_id = f"p{i}"
        p = rng.normal(size=dim)
        gold_index = int(rng.integers(10))
        cset = make_candidate_set(post_id, gold_index=gold_index)
        csets.append(cset)
        entries.append((f"P:{post_id}", p.astype(np.float32)))
        for j, cand in enumerate(cset.candidates):
            if j == gold_index:
                q = p + noise * rng.normal(size=dim)
            else:
                q = rng.normal(size=dim)
            entries.append((f"Q:{cand.cid}", q.astype(np.float32)))
            entries.append((f"A:{cand.cid}", rng.normal(size=dim).astype(np.float32)))
    return csets, entries


@pytest.fixture
def small_corpus(tmp_path):
    from cqrank.store import open_store, write_store

    csets, entries = synth_corpus(20, 8, seed=7)
    path = tmp_path / "store.bin"
    write_store(entries, 8, path)
    return csets, open_store(path)
