"""Command-line entry points: corpus synthesis, training, sampling, eval, serve."""

from __future__ import annotations

import json
import os
from pathlib import Path

import click
import numpy as np

from .config import Config, load_config
from .corpus import generate_corpus, read_corpus, write_corpus
from .errors import AnnotationError


@click.group()
def main():
    """Desk-scale trajectory-controlled video generation."""


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--clips", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--length", default=8, show_default=True)
@click.option("--height", default=64, show_default=True)
@click.option("--width", default=64, show_default=True)
@click.option("--shapes", default=2, show_default=True)
def synth(out_dir, clips, seed, length, height, width, shapes):
    """Generate a synthetic moving-shapes corpus."""
    corpus = generate_corpus(n_clips=clips, seed=seed, length=length,
                             height=height, width=width, n_shapes=shapes)
    write_corpus(corpus, out_dir)
    click.echo(f"wrote {len(corpus)} clips to {out_dir}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              help="TOML or JSON config file; defaults apply when omitted.")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", default="runs/train", show_default=True,
              type=click.Path(path_type=Path))
@click.option("--resume", "resume_from", type=click.Path(exists=True, path_type=Path))
@click.option("--log-every", default=100, show_default=True)
def train(config_path, corpus_dir, out_dir, resume_from, log_every):
    """Train the conditioned denoiser on a corpus."""
    from .training import run_training

    config = load_config(config_path) if config_path else Config()
    corpus = read_corpus(corpus_dir)
    result = run_training(config, corpus, out_dir, resume_from=resume_from,
                          log_every=log_every)
    click.echo(f"finished at step {result.step}, final loss "
               f"{result.losses[-1]:.6f}, checkpoint {result.checkpoint_path}")


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--request", "request_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="JSON: annotation document plus optional first_frame/steps/seed.")
@click.option("--first-frame", "frame_path", type=click.Path(exists=True, path_type=Path),
              help="PNG first frame; overrides the request's first_frame path.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def sample(checkpoint, request_path, frame_path, out_path):
    """Generate a clip for a drag request and write it as .drgl + .json."""
    from PIL import Image

    from .annotations import ClipAnnotation, annotation_from_dict
    from .corpus import CorpusClip, write_clip
    from .sampling import GenerationRequest, sample_video

    doc = json.loads(request_path.read_text("utf-8"))
    steps = doc.pop("steps", None)
    seed = doc.pop("seed", 0)
    frame_ref = doc.pop("first_frame", None)
    if frame_path is None:
        if frame_ref is None:
            raise click.UsageError(
                "request has no 'first_frame' key; pass --first-frame")
        frame_path = (request_path.parent / frame_ref).resolve()
    try:
        ann = annotation_from_dict(doc)
    except AnnotationError as exc:
        raise click.UsageError(f"bad request annotation: {exc}")
    image = np.asarray(Image.open(frame_path).convert("RGB"),
                       dtype=np.float32) / 255.0
    request = GenerationRequest(first_frame=image, entities=ann.entities,
                                steps=steps, seed=seed)
    result = sample_video(request, checkpoint)
    out_path = out_path if out_path.suffix == ".drgl" else out_path.with_suffix(".drgl")
    clip = CorpusClip(clip_id=out_path.stem, frames=result.frames,
                      annotation=ClipAnnotation(width=ann.width, height=ann.height,
                                                frames=ann.frames,
                                                entities=ann.entities))
    write_clip(out_path, clip)
    click.echo(f"wrote {out_path} ({result.frames.shape[0]} frames)")


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--report", "report_path", required=True, type=click.Path(path_type=Path))
@click.option("--steps", default=None, type=int, help="Sampler steps (default: full schedule).")
@click.option("--seed", default=0, show_default=True)
def eval_cmd(checkpoint, corpus_dir, report_path, steps, seed):
    """Evaluate a checkpoint on a corpus and write a JSON report."""
    from .evaluation import evaluate

    corpus = read_corpus(corpus_dir)
    summary = evaluate(checkpoint, corpus, steps=steps, seed=seed,
                       report_path=report_path)
    click.echo(f"mean trajectory error {summary['mean_objmc']:.3f} px over "
               f"{len(summary['clips'])} clips -> {report_path}")


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              help="Defaults to $DRAG_LAB_CHECKPOINT.")
@click.option("--ui", "ui_dir", type=click.Path(exists=True, path_type=Path),
              help="Serve a built frontend from this directory.")
def serve(port, host, checkpoint, ui_dir):
    """Run the HTTP generation service."""
    import uvicorn

    from .service import create_app

    if checkpoint is None:
        env = os.environ.get("DRAG_LAB_CHECKPOINT")
        checkpoint = Path(env) if env else None
    if checkpoint is None:
        click.echo("warning: no checkpoint; service starts degraded", err=True)
    app = create_app(checkpoint=checkpoint, static_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
