"""CLI: extract a store offline, or serve embeddings over HTTP."""

from __future__ import annotations

import sys

import click

from .encoders import load_encoder
from .extract import extract as run_extract, read_text_file


@click.group()
def main():
    """Sentence embedding extraction and serving."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help='JSONL of {"key": str, "text": str}')
@click.option("--model", "model_tag", required=True,
              help='Encoder tag, or "stub" for the deterministic test encoder')
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dim", type=int, default=768, show_default=True,
              help="Vector width (stub encoder only; real encoders declare their own)")
@click.option("--include-padding", is_flag=True,
              help="Average over padding positions too instead of masking them out")
def extract(input_path, model_tag, out_path, dim, include_padding):
    """Encode every text in the input file into a binary embedding store."""
    encoder = load_encoder(model_tag, dim=dim)
    pairs = read_text_file(input_path)
    digest = run_extract(pairs, encoder, out_path, include_padding)
    click.echo(f"wrote {len(pairs)} vectors (dim {encoder.spec.dim}) digest {digest[:16]}")


@main.command()
@click.option("--model", "model_tag", required=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--dim", type=int, default=768, show_default=True)
@click.option("--max-batch", type=int, default=256, show_default=True)
def serve(model_tag, port, host, dim, max_batch):
    """Run the HTTP embedding service."""
    from .service import serve as run_serve

    encoder = load_encoder(model_tag, dim=dim)
    run_serve(encoder, port=port, host=host, max_batch=max_batch)


if __name__ == "__main__":
    sys.exit(main())
