import numpy as np
import pytest

from cqrank import nn, training
from cqrank.ranking import FeatureSpec

from conftest import synth_corpus


def checkpoint_bytes(model, state, tmp_path, name):
    path = tmp_path / name
    nn.save_checkpoint(model, state, path)
    return path.read_bytes()


def separable_examples(n=200, dim=8, seed=0):
    # two Gaussian blobs far apart: trivially separable
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        label = i % 2
        center = 3.0 if label else -3.0
        feat = rng.normal(loc=center, scale=0.5, size=dim)
        examples.append(training.TrainingExample(feat, label, f"p{i}", f"c{i}"))
    return examples


def tiny_config(**kw):
    defaults = dict(
        variant="pq",
        encoder_dim=4,
        batch_size=50,
        epochs=5,
        learning_rate=0.01,
        dropout_rate=0.0,
        seed=0,
        hidden_dims=(8, 6),
    )
    defaults.update(kw)
    return training.TrainConfig(**defaults)


class TestConfig:
    def test_paper_defaults(self):
        cfg = training.TrainConfig()
        assert cfg.batch_size == 1000
        assert cfg.epochs == 50
        assert cfg.learning_rate == 0.01
        assert cfg.dropout_rate == 0.4

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            training.TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            training.TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            training.TrainConfig(dropout_rate=1.0)

    def test_digest_changes_with_config(self):
        a = training.config_digest(training.TrainConfig())
        b = training.config_digest(training.TrainConfig(seed=1))
        assert a != b
        assert a == training.config_digest(training.TrainConfig())


class TestBuildExamples:
    def test_ten_per_post_labels_sum_one(self, small_corpus):
        csets, store = small_corpus
        spec = FeatureSpec("pq", 8)
        examples = training.build_examples(csets, store, spec)
        assert len(examples) == 10 * len(csets)
        for i in range(0, len(examples), 10):
            chunk = examples[i : i + 10]
            assert sum(ex.label for ex in chunk) == 1
            assert len({ex.post_id for ex in chunk}) == 1

    def test_feature_length_pq(self, small_corpus):
        csets, store = small_corpus
        examples = training.build_examples(csets, store, FeatureSpec("pq", 8))
        assert all(ex.feature.shape == (16,) for ex in examples)

    def test_feature_length_pqa(self, small_corpus):
        csets, store = small_corpus
        examples = training.build_examples(csets, store, FeatureSpec("pqa", 8))
        assert all(ex.feature.shape == (24,) for ex in examples)

    def test_deterministic_order(self, small_corpus):
        csets, store = small_corpus
        spec = FeatureSpec("pq", 8)
        a = training.build_examples(csets, store, spec)
        b = training.build_examples(csets, store, spec)
        assert [(x.post_id, x.candidate_id) for x in a] == [
            (x.post_id, x.candidate_id) for x in b
        ]

    def test_positive_rate_ten_percent(self, small_corpus):
        csets, store = small_corpus
        examples = training.build_examples(csets, store, FeatureSpec("pq", 8))
        assert sum(ex.label for ex in examples) / len(examples) == 0.1


class TestTrain:
    def test_separable_data_low_loss(self):
        examples = separable_examples()
        cfg = tiny_config(epochs=50)
        model, state, log = training.train(examples, cfg)
        assert log.epochs[-1].train_loss < 0.05

    def test_loss_nonincreasing_smoothed(self):
        examples = separable_examples()
        cfg = tiny_config(epochs=20)
        _, _, log = training.train(examples, cfg)
        losses = [e.train_loss for e in log.epochs]
        window = [np.mean(losses[i : i + 5]) for i in range(0, 20, 5)]
        assert all(b <= a + 1e-9 for a, b in zip(window, window[1:]))

    def test_single_batch_single_step(self):
        examples = separable_examples(n=40)
        cfg = tiny_config(epochs=1, batch_size=1000)
        model, state, log = training.train(examples, cfg)
        assert state.t == 1
        assert len(log.epochs) == 1

    def test_empty_examples_rejected(self):
        with pytest.raises(ValueError, match="no training examples"):
            training.train([], tiny_config())

    def test_feature_dim_checked(self):
        examples = separable_examples(dim=5)
        with pytest.raises(ValueError, match="feature dim"):
            training.train(examples, tiny_config())

    def test_determinism_bitwise(self, tmp_path):
        examples = separable_examples()
        cfg = tiny_config(epochs=3, dropout_rate=0.4)
        m1, s1, _ = training.train(examples, cfg)
        m2, s2, _ = training.train(examples, cfg)
        assert checkpoint_bytes(m1, s1, tmp_path, "a.ckpt") == checkpoint_bytes(
            m2, s2, tmp_path, "b.ckpt"
        )

    def test_seed_changes_model(self, tmp_path):
        examples = separable_examples()
        m1, s1, _ = training.train(examples, tiny_config(epochs=2))
        m2, s2, _ = training.train(examples, tiny_config(epochs=2, seed=5))
        assert checkpoint_bytes(m1, s1, tmp_path, "a.ckpt") != checkpoint_bytes(
            m2, s2, tmp_path, "b.ckpt"
        )

    def test_class_weighting_runs(self):
        examples = separable_examples()
        model, _, log = training.train(examples, tiny_config(class_weighting=True, epochs=2))
        assert np.isfinite(log.epochs[-1].train_loss)

    def test_validation_metrics_logged(self, small_corpus):
        csets, store = small_corpus
        spec = FeatureSpec("pq", 8)
        examples = training.build_examples(csets, store, spec)
        cfg = tiny_config(encoder_dim=8, epochs=2, batch_size=64)
        _, _, log = training.train(examples, cfg, val_examples=examples)
        assert log.epochs[-1].val_loss is not None
        assert 0.0 <= log.epochs[-1].val_p_at_1 <= 1.0


class TestCheckpointResume:
    def test_resume_equivalence(self, tmp_path):
        examples = separable_examples()
        cfg = tiny_config(epochs=8, dropout_rate=0.4)
        full_dir = tmp_path / "full"
        m_full, s_full, _ = training.train(examples, cfg, out_dir=full_dir)

        part_dir = tmp_path / "part"
        short = tiny_config(epochs=4, dropout_rate=0.4)
        training.train(examples, short, out_dir=part_dir)
        m_res, s_res, log = training.train(
            examples, cfg, out_dir=part_dir, resume_from=part_dir / "epoch_0003.ckpt"
        )
        assert [e.epoch for e in log.epochs] == [4, 5, 6, 7]
        assert checkpoint_bytes(m_full, s_full, tmp_path, "f.ckpt") == checkpoint_bytes(
            m_res, s_res, tmp_path, "r.ckpt"
        )

    def test_checkpoints_written_per_epoch(self, tmp_path):
        examples = separable_examples(n=40)
        cfg = tiny_config(epochs=3)
        training.train(examples, cfg, out_dir=tmp_path / "ck")
        names = sorted(p.name for p in (tmp_path / "ck").iterdir())
        assert names == ["epoch_0000.ckpt", "epoch_0001.ckpt", "epoch_0002.ckpt"]

    def test_train_log_jsonl(self, tmp_path):
        examples = separable_examples(n=40)
        _, _, log = training.train(examples, tiny_config(epochs=2))
        path = tmp_path / "log.jsonl"
        log.write(path)
        import json

        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(lines) == 3
        assert lines[-1]["summary"] is True
        assert lines[0]["epoch"] == 0
