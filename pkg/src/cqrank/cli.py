"""Command-line pipeline driver.

Subcommands: prepare, embed-fetch, train, rank, eval, analyze. A TOML config
file supplies paths and training settings; flags override individual values.
Defaults match the published SBERT settings (batch 1000, 50 epochs, lr 0.01,
dropout 0.4), so `train` with no overrides is the base PQ run.

Exit codes: 2 config error, 3 data-validation error, 4 numeric failure.
"""

from __future__ import annotations

import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
from dataclasses import asdict
from pathlib import Path

import click

from . import data, metrics, nn, ranking, store, training

VARIANT_MAP = {
    "pq": ("pq", 768),
    "pqa": ("pqa", 768),
    "large-pq": ("pq", 1024),
    "large-pqa": ("pqa", 1024),
}

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(ValueError):
    pass


def load_config(config_path, overrides: dict) -> dict:
    cfg = {"paths": {}, "model": {}, "train": {}}
    if config_path is not None:
        try:
            with open(config_path, "rb") as f:
                parsed = tomllib.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}")
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{config_path}: {e}")
        for section in cfg:
            cfg[section].update(parsed.get(section, {}))
        base = Path(config_path).parent
        for key, val in cfg["paths"].items():
            cfg["paths"][key] = str((base / val) if not Path(val).is_absolute() else val)
    for key, val in overrides.items():
        if val is None:
            continue
        section, name = key
        cfg[section][name] = val
    return cfg


def train_config_from(cfg: dict) -> training.TrainConfig:
    variant_name = cfg["model"].get("variant", "pq")
    if variant_name not in VARIANT_MAP:
        raise ConfigError(
            f"unknown variant {variant_name!r}; choose from {sorted(VARIANT_MAP)}"
        )
    variant, encoder_dim = VARIANT_MAP[variant_name]
    t = cfg["train"]
    try:
        return training.TrainConfig(
            variant=variant,
            encoder_dim=encoder_dim,
            batch_size=int(t.get("batch_size", 1000)),
            epochs=int(t.get("epochs", 50)),
            learning_rate=float(t.get("learning_rate", 0.01)),
            dropout_rate=float(t.get("dropout_rate", 0.4)),
            seed=int(t.get("seed", 0)),
            hidden_dims=tuple(cfg["model"].get("hidden_dims", (512, 256))),
            class_weighting=bool(t.get("class_weighting", False)),
        )
    except ValueError as e:
        raise ConfigError(str(e))


def _path(cfg: dict, key: str, must_exist: bool = True) -> Path:
    val = cfg["paths"].get(key)
    if val is None:
        raise ConfigError(f"missing path {key!r} in config [paths] section or flags")
    p = Path(val)
    if must_exist and not p.exists():
        raise ConfigError(f"{key} path does not exist: {p}")
    return p


def _open_store(cfg: dict, tc: training.TrainConfig) -> store.EmbeddingStore:
    st = store.open_store(_path(cfg, "store"))
    if st.dim != tc.encoder_dim:
        raise ConfigError(
            f"store dim {st.dim} disagrees with variant encoder dim {tc.encoder_dim}"
        )
    return st


def _announce(tc: training.TrainConfig) -> None:
    click.echo(f"config digest: {training.config_digest(tc)}")


_common = [
    click.option("--config", "config_path", type=click.Path(), default=None),
    click.option("--variant", type=click.Choice(sorted(VARIANT_MAP)), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--epochs", type=int, default=None),
    click.option("--batch-size", type=int, default=None),
    click.option("--lr", type=float, default=None),
    click.option("--dropout", type=float, default=None),
    click.option("--store", "store_path", type=click.Path(), default=None),
    click.option("--out", "out_dir", type=click.Path(), default=None),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


def _gather(config_path, variant, seed, epochs, batch_size, lr, dropout, store_path, out_dir):
    overrides = {
        ("model", "variant"): variant,
        ("train", "seed"): seed,
        ("train", "epochs"): epochs,
        ("train", "batch_size"): batch_size,
        ("train", "learning_rate"): lr,
        ("train", "dropout_rate"): dropout,
        ("paths", "store"): store_path,
        ("paths", "out"): out_dir,
    }
    return load_config(config_path, overrides)


@click.group()
def main():
    """Clarification-question ranking pipeline."""


@main.command()
@common_options
def prepare(**kw):
    """Validate all configured dataset files and write split manifests."""
    cfg = _gather(**kw)
    tc = train_config_from(cfg)
    _announce(tc)
    out = Path(cfg["paths"].get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    manifests = {}
    for split in ("train", "validation"):
        if cfg["paths"].get(split):
            _, mf = data.load_candidate_sets(_path(cfg, split), split)
            manifests[split] = asdict(mf)
            click.echo(f"{split}: {mf.record_count} candidate sets")
    if cfg["paths"].get("test"):
        test_sets, mf = data.load_candidate_sets(_path(cfg, "test"), "test")
        manifests["test"] = asdict(mf)
        click.echo(f"test: {mf.record_count} candidate sets")
        if cfg["paths"].get("annotations"):
            _, amf = data.load_annotations(_path(cfg, "annotations"), test_sets)
            manifests["annotations"] = asdict(amf)
            click.echo(
                f"annotations: {amf.record_count} posts, "
                f"{len(amf.empty_gold_posts)} with empty valid gold"
            )
    (out / "manifests.json").write_text(json.dumps(manifests, indent=2) + "\n")
    click.echo(f"wrote {out / 'manifests.json'}")


@main.command("embed-fetch")
@common_options
@click.option("--endpoint", required=True, help="Embedding service base URL")
@click.option("--fetch-batch", type=int, default=64, show_default=True)
def embed_fetch(endpoint, fetch_batch, **kw):
    """Fetch embeddings for every post/question/answer text into the store."""
    cfg = _gather(**kw)
    tc = train_config_from(cfg)
    _announce(tc)
    info = store.service_info(endpoint)
    if info.get("dim") != tc.encoder_dim:
        raise ConfigError(
            f"service dim {info.get('dim')} disagrees with variant encoder dim {tc.encoder_dim}"
        )
    texts: dict[str, str] = {}
    for split in ("train", "validation", "test"):
        if not cfg["paths"].get(split):
            continue
        sets, _ = data.load_candidate_sets(_path(cfg, split), split)
        for cs in sets:
            for cand in cs.candidates:
                texts.setdefault(f"Q:{cand.cid}", cand.question_text)
                texts.setdefault(f"A:{cand.cid}", cand.answer_text)
    for split in ("train", "validation", "test"):
        key = split + "_triples"
        if not cfg["paths"].get(key):
            continue
        triples, _ = data.load_triples(_path(cfg, key))
        for rec in triples:
            texts.setdefault(f"P:{rec.post_id}", rec.post_text)
    if not texts:
        raise ConfigError("no dataset paths configured; nothing to embed")
    keys = list(texts)
    entries = []
    for lo in range(0, len(keys), fetch_batch):
        chunk = keys[lo : lo + fetch_batch]
        vecs = store.fetch_remote(
            endpoint, [texts[k] for k in chunk], expected_dim=tc.encoder_dim
        )
        entries.extend(zip(chunk, vecs))
    digest = store.write_store(
        entries, tc.encoder_dim, _path(cfg, "store", must_exist=False),
        provenance=str(info.get("model", "")),
    )
    click.echo(f"wrote {len(entries)} vectors, digest {digest[:16]}")


@main.command()
@common_options
@click.option("--resume", "resume_from", type=click.Path(exists=True), default=None)
def train(resume_from, **kw):
    """Train the classifier; writes per-epoch checkpoints and a train log."""
    cfg = _gather(**kw)
    tc = train_config_from(cfg)
    _announce(tc)
    st = _open_store(cfg, tc)
    spec = tc.feature_spec
    train_sets, _ = data.load_candidate_sets(_path(cfg, "train"), "train")
    examples = training.build_examples(train_sets, st, spec)
    val_examples = None
    if cfg["paths"].get("validation"):
        val_sets, _ = data.load_candidate_sets(_path(cfg, "validation"), "validation")
        val_examples = training.build_examples(val_sets, st, spec)
    out = Path(cfg["paths"].get("out", "out"))
    ckpt_dir = out / "checkpoints"
    model, state, log = training.train(
        examples, tc, out_dir=ckpt_dir, val_examples=val_examples, resume_from=resume_from
    )
    log.write(out / "train_log.jsonl")
    click.echo(f"trained {tc.epochs} epochs; checkpoints in {ckpt_dir}")


@main.command()
@common_options
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), default=None)
@click.option("--split", type=click.Choice(["test", "validation", "train"]), default="test")
def rank(checkpoint_path, split, **kw):
    """Rank each post's candidates with a trained checkpoint."""
    cfg = _gather(**kw)
    tc = train_config_from(cfg)
    _announce(tc)
    st = _open_store(cfg, tc)
    if checkpoint_path is None:
        checkpoint_path = cfg["paths"].get("checkpoint")
    if checkpoint_path is None or not Path(checkpoint_path).exists():
        raise ConfigError(f"checkpoint path missing or does not exist: {checkpoint_path}")
    model, _ = nn.load_checkpoint(checkpoint_path)
    sets, _ = data.load_candidate_sets(_path(cfg, split), split)
    rankings = ranking.rank_candidate_sets(model, sets, st, tc.feature_spec)
    out = Path(cfg["paths"].get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    ranking.write_rankings(rankings, out / "rankings.jsonl")
    click.echo(f"ranked {len(rankings)} posts -> {out / 'rankings.jsonl'}")


def _load_eval_inputs(cfg):
    test_sets, _ = data.load_candidate_sets(_path(cfg, "test"), "test")
    annotations, _ = data.load_annotations(_path(cfg, "annotations"), test_sets)
    out = Path(cfg["paths"].get("out", "out"))
    rankings_path = cfg["paths"].get("rankings", out / "rankings.jsonl")
    if not Path(rankings_path).exists():
        raise ConfigError(f"rankings file does not exist: {rankings_path}")
    rankings = ranking.read_rankings(rankings_path)
    return test_sets, annotations, rankings, out


@main.command("eval")
@common_options
@click.option("--regime", type=click.Choice(["best", "valid", "both"]), default="both")
@click.option("--empty-gold", type=click.Choice(["skip", "zero"]), default="skip")
def eval_cmd(regime, empty_gold, **kw):
    """Compute P@1..P@5 against the test annotations."""
    cfg = _gather(**kw)
    tc = train_config_from(cfg)
    _announce(tc)
    _, annotations, rankings, out = _load_eval_inputs(cfg)
    regimes = ["best", "valid"] if regime == "both" else [regime]
    reports = [metrics.evaluate(rankings, annotations, r, empty_gold) for r in regimes]
    model_tag = cfg["model"].get("variant", "pq")
    metrics.emit_report(reports, [], out, model_tag)
    for rep in reports:
        line = ", ".join(f"P@{k}={rep.p_at[k]:.1f}" for k in sorted(rep.p_at))
        click.echo(f"{rep.regime}: {line} ({rep.posts_evaluated} posts, "
                   f"{rep.posts_skipped_empty_gold} skipped)")


@main.command()
@common_options
@click.option("--regime", type=click.Choice(["best", "valid", "both"]), default="both")
@click.option("--empty-gold", type=click.Choice(["skip", "zero"]), default="skip")
def analyze(regime, empty_gold, **kw):
    """Bucket rank-1 correctness by post token length."""
    cfg = _gather(**kw)
    tc = train_config_from(cfg)
    _announce(tc)
    test_sets, annotations, rankings, out = _load_eval_inputs(cfg)
    triples_path = cfg["paths"].get("test_triples")
    if triples_path:
        triples, _ = data.load_triples(triples_path)
        post_texts = {t.post_id: t.post_text for t in triples}
    else:
        raise ConfigError("analyze requires [paths] test_triples (post texts for lengths)")
    regimes = ["best", "valid"] if regime == "both" else [regime]
    reports = [
        metrics.bucket_by_length(rankings, annotations, post_texts, r, empty_gold)
        for r in regimes
    ]
    model_tag = cfg["model"].get("variant", "pq")
    metrics.emit_report([], reports, out, model_tag)
    for rep in reports:
        counts = "/".join(str(b.post_count) for b in rep.buckets)
        hits = "/".join(str(b.correct_at_1) for b in rep.buckets)
        click.echo(f"{rep.regime}: posts {counts}, correct@1 {hits}")


def run(argv=None) -> int:
    """Entry point with mapped exit codes (used by tests and __main__)."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except (ConfigError, tomllib.TOMLDecodeError) as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_CONFIG
    except (data.ParseError, data.ValidationError, store.StoreFormatError,
            store.MissingKeyError, nn.CheckpointError, KeyError, ValueError) as e:
        click.echo(f"data error: {e}", err=True)
        return EXIT_DATA
    except nn.NumericError as e:
        click.echo(f"numeric error: {e}", err=True)
        return EXIT_NUMERIC
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 1


def cli_entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    cli_entry()
