"""Color-centroid tracking and the mean-trajectory-distance metric."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusClip
from .errors import InvalidEntityError
from .sampling import GenerationRequest, sample_video
from .training import load_checkpoint_payload, load_model

DEFAULT_COLOR_TOLERANCE = 0.25


def track_centroid(video: np.ndarray, reference_mask: np.ndarray,
                   tolerance: float = DEFAULT_COLOR_TOLERANCE) -> np.ndarray:
    """Per-frame centroid of pixels matching the entity's first-frame color.

    The reference color is the mean over the first-frame mask; a frame with no
    matching pixels carries the previous frame's point forward. Returns an
    (L, 2) array of (x, y) points.
    """
    video = np.asarray(video, dtype=np.float32)
    mask = np.asarray(reference_mask, dtype=bool)
    if video.ndim != 4 or video.shape[3] != 3:
        raise ValueError(f"video must be (L, H, W, 3), got {video.shape}")
    if mask.shape != video.shape[1:3]:
        raise ValueError(f"mask shape {mask.shape} does not match frames")
    if not mask.any():
        raise InvalidEntityError("reference mask has no foreground pixels")
    color = video[0][mask].mean(axis=0)
    ys, xs = np.nonzero(mask)
    previous = np.array([xs.mean(), ys.mean()])
    points = np.zeros((video.shape[0], 2))
    for i, frame in enumerate(video):
        dist = np.linalg.norm(frame - color, axis=-1)
        match = dist <= tolerance
        if match.any():
            ys, xs = np.nonzero(match)
            previous = np.array([xs.mean(), ys.mean()])
        points[i] = previous
    return points


@dataclass
class EvalReport:
    per_entity: dict[str, float]
    mean_objmc: float
    per_frame: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"per_entity": self.per_entity, "mean_objmc": self.mean_objmc,
                "per_frame": self.per_frame}


def objmc(predicted: dict[str, np.ndarray], reference: dict[str, np.ndarray]) -> EvalReport:
    """Mean Euclidean distance between matched trajectories.

    Per entity: mean over frames of the pointwise distance; the report mean
    averages the per-entity values.
    """
    if set(predicted) != set(reference):
        raise ValueError(f"entity ids differ: {sorted(predicted)} vs "
                         f"{sorted(reference)}")
    if not predicted:
        raise ValueError("no trajectories to compare")
    per_entity = {}
    per_frame = {}
    for eid in sorted(predicted):
        pred = np.asarray(predicted[eid], dtype=np.float64)
        ref = np.asarray(reference[eid], dtype=np.float64)
        if pred.shape != ref.shape:
            raise ValueError(f"entity {eid!r}: trajectory lengths differ "
                             f"({pred.shape[0]} vs {ref.shape[0]})")
        errors = np.linalg.norm(pred - ref, axis=1)
        per_entity[eid] = float(errors.mean())
        per_frame[eid] = [float(e) for e in errors]
    mean = float(np.mean(list(per_entity.values())))
    return EvalReport(per_entity=per_entity, mean_objmc=mean, per_frame=per_frame)


def config_hash(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def evaluate(checkpoint, corpus: list[CorpusClip], steps: int | None = None,
             seed: int = 0, tolerance: float = DEFAULT_COLOR_TOLERANCE,
             report_path=None) -> dict:
    """Sample every corpus clip from its annotation, track the result, and
    score it against the annotated trajectories."""
    payload = load_checkpoint_payload(checkpoint) if isinstance(
        checkpoint, (str, Path)) else None
    if payload is not None:
        config, model = load_model(checkpoint)
        step = payload["step"]
    else:
        config, model = checkpoint
        step = -1
    clips = sorted(corpus, key=lambda c: c.clip_id)
    clip_reports = []
    for i, clip in enumerate(clips):
        request = GenerationRequest(first_frame=clip.frames[0],
                                    entities=clip.annotation.entities,
                                    steps=steps, seed=seed + i)
        result = sample_video(request, (config, model))
        predicted = {}
        reference = {}
        for entity in clip.annotation.entities:
            predicted[entity.entity_id] = track_centroid(
                result.frames, entity.mask, tolerance=tolerance)
            reference[entity.entity_id] = entity.trajectory
        report = objmc(predicted, reference)
        clip_reports.append({"clip_id": clip.clip_id, **report.to_dict()})
    summary = {
        "checkpoint_step": step,
        "config_hash": config_hash(config.to_dict()),
        "flags": {"use_entity": config.train.use_entity,
                  "use_gaussian": config.train.use_gaussian,
                  "use_loss_mask": config.train.use_loss_mask},
        "sampler_steps": steps if steps is not None else config.schedule.T,
        "seed": seed,
        "mean_objmc": float(np.mean([c["mean_objmc"] for c in clip_reports])),
        "clips": clip_reports,
    }
    if report_path is not None:
        Path(report_path).write_text(json.dumps(summary, indent=2), "utf-8")
    return summary


def evaluate_grid(checkpoints: dict[str, object], corpus: list[CorpusClip],
                  **kwargs) -> dict[str, dict]:
    """One evaluation report per ablation cell."""
    return {name: evaluate(ckpt, corpus, **kwargs)
            for name, ckpt in checkpoints.items()}
