"""On-disk clip corpus and training-sample assembly.

A corpus is a directory with one binary file per clip plus a JSON annotation:

    clip_00000.drgl   little-endian header {magic "DRGL", version u32,
                      L, H, W, C u32} followed by raw float32 frames
    clip_00000.json   the annotation interchange document (with per-frame
                      entity masks in ``frame_masks_rle``)
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import (
    ClipAnnotation,
    EntityAnnotation,
    annotation_from_json,
    annotation_to_json,
)
from .errors import CorpusFormatError, UnsupportedVersionError
from .representation import Trajectory, build_representation_sequences, compute_incircle
from .synthetic import GeneratedClip, generate_clip, random_scene

MAGIC = b"DRGL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, L, H, W, C


@dataclass
class CorpusClip:
    clip_id: str
    frames: np.ndarray = field(repr=False)  # (L, H, W, 3) float32
    annotation: ClipAnnotation


@dataclass
class TrainingSample:
    """Everything one clip contributes to the masked denoising objective."""

    clip: np.ndarray = field(repr=False)              # (L, H, W, 3) float32
    first_frame_masks: np.ndarray = field(repr=False)  # (K, H, W) bool
    gt_trajectories: np.ndarray = field(repr=False)   # (K, L, 2) anchored at incircles
    entity_rep: np.ndarray = field(repr=False)        # (L, H, W, C) float32
    gaussian_rep: np.ndarray = field(repr=False)      # (L, H, W) float32
    loss_mask: np.ndarray = field(repr=False)         # (L, H, W) bool
    entity_ids: list[str] = field(default_factory=list)


def clip_to_corpus(clip: GeneratedClip, clip_id: str) -> CorpusClip:
    entities = [
        EntityAnnotation(entity_id=eid, mask=clip.masks[k, 0],
                         trajectory=clip.trajectories[k],
                         frame_masks=clip.masks[k])
        for k, eid in enumerate(clip.entity_ids)
    ]
    ann = ClipAnnotation(width=clip.spec.width, height=clip.spec.height,
                         frames=clip.spec.length, entities=entities)
    return CorpusClip(clip_id=clip_id, frames=clip.frames, annotation=ann)


def generate_corpus(n_clips: int, seed: int, length: int = 8, height: int = 64,
                    width: int = 64, n_shapes: int = 2) -> list[CorpusClip]:
    """Deterministic corpus of random scenes; clip k uses sub-seed seed*100000 + k."""
    clips = []
    for k in range(n_clips):
        spec = random_scene(seed * 100_000 + k, length=length, height=height,
                            width=width, n_shapes=n_shapes)
        clips.append(clip_to_corpus(generate_clip(spec), clip_id=f"clip_{k:05d}"))
    return clips


def _atomic_write(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_clip(path: Path, clip: CorpusClip):
    frames = np.ascontiguousarray(clip.frames, dtype="<f4")
    length, height, width, channels = frames.shape
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, length, height, width, channels)
    _atomic_write(path, header + frames.tobytes())
    _atomic_write(path.with_suffix(".json"),
                  annotation_to_json(clip.annotation).encode("utf-8"))


def read_clip(path: Path) -> CorpusClip:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise CorpusFormatError(
            f"{path.name}: file shorter than the {_HEADER.size}-byte header",
            offset=len(data))
    magic, version, length, height, width, channels = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorpusFormatError(f"{path.name}: bad magic {magic!r}", offset=0)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path.name}: format version {version}, this build reads {FORMAT_VERSION}",
            offset=4)
    expected = _HEADER.size + length * height * width * channels * 4
    if len(data) != expected:
        raise CorpusFormatError(
            f"{path.name}: expected {expected} bytes, got {len(data)}",
            offset=len(data))
    frames = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(
        length, height, width, channels)
    ann = annotation_from_json(path.with_suffix(".json").read_text("utf-8"))
    return CorpusClip(clip_id=path.stem, frames=frames.copy(), annotation=ann)


def write_corpus(clips: list[CorpusClip], root) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for clip in clips:
        write_clip(root / f"{clip.clip_id}.drgl", clip)
    return root


def read_corpus(root) -> list[CorpusClip]:
    root = Path(root)
    paths = sorted(root.glob("*.drgl"))
    if not paths:
        raise CorpusFormatError(f"no .drgl clips under {root}")
    return [read_clip(p) for p in paths]


def anchor_trajectory(points: np.ndarray, center) -> np.ndarray:
    """Translate a trajectory so its first point is the incircle center."""
    points = np.asarray(points, dtype=np.float64)
    return points + (np.asarray(center, dtype=np.float64) - points[0])


def make_training_sample(clip: np.ndarray, first_frame_masks, trajectories,
                         embeddings, frame_masks,
                         entity_ids: list[str] | None = None) -> TrainingSample:
    """Compose incircles and representation maps into one training sample.

    Each trajectory is re-anchored so that its first point is the entity's
    incircle center; the per-frame loss mask is the union of the analytic
    entity regions.
    """
    length, height, width = clip.shape[:3]
    first_frame_masks = np.asarray(first_frame_masks, dtype=bool)
    frame_masks = np.asarray(frame_masks, dtype=bool)
    n_entities = first_frame_masks.shape[0]
    if frame_masks.shape != (n_entities, length, height, width):
        raise ValueError(f"frame_masks shape {frame_masks.shape} does not match "
                         f"(K={n_entities}, L={length}, H={height}, W={width})")
    embeddings = np.asarray(embeddings, dtype=np.float32)
    channels = embeddings.shape[1] if embeddings.ndim == 2 else 0
    if entity_ids is None:
        entity_ids = [f"entity{k}" for k in range(n_entities)]

    anchored = np.zeros((n_entities, length, 2), dtype=np.float64)
    triples = []
    for k in range(n_entities):
        circle = compute_incircle(first_frame_masks[k])
        anchored[k] = anchor_trajectory(trajectories[k], circle.center)
        triples.append((embeddings[k],
                        Trajectory(entity_ids[k], anchored[k]), circle.radius))
    entity_rep, gaussian_rep = build_representation_sequences(
        triples, length, height, width, channels)
    loss_mask = frame_masks.any(axis=0) if n_entities else np.zeros(
        (length, height, width), dtype=bool)
    return TrainingSample(clip=np.asarray(clip, dtype=np.float32),
                          first_frame_masks=first_frame_masks,
                          gt_trajectories=anchored, entity_rep=entity_rep,
                          gaussian_rep=gaussian_rep, loss_mask=loss_mask,
                          entity_ids=list(entity_ids))
