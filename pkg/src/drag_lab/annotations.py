"""JSON interchange format for masks and trajectories.

A clip annotation is a JSON document::

    {"width": W, "height": H, "frames": L,
     "entities": [{"id": "...", "mask_rle": [...], "trajectory": [[x, y], ...]}]}

``mask_rle`` is a row-major run-length encoding of the binary mask whose run
lengths alternate starting with the count of zeros. Entities may additionally
carry ``frame_masks_rle`` (one RLE per frame) when per-frame regions are known;
decoders of the base format ignore it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AnnotationError

FORMAT_KEYS = ("width", "height", "frames", "entities")


def rle_encode(grid: np.ndarray) -> list[int]:
    """Row-major run-length encoding, runs alternating starting with zeros."""
    flat = np.asarray(grid).astype(bool).ravel()
    if flat.size == 0:
        return []
    boundaries = np.flatnonzero(np.diff(flat.view(np.int8))) + 1
    runs = np.diff(np.concatenate(([0], boundaries, [flat.size]))).tolist()
    if flat[0]:  # first run must count zeros
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(runs, height: int, width: int) -> np.ndarray:
    """Decode alternating zero/one run lengths into an (H, W) bool grid."""
    total = 0
    flat = np.zeros(height * width, dtype=bool)
    value = False
    for i, run in enumerate(runs):
        if not isinstance(run, int) or isinstance(run, bool) or run < 0:
            raise AnnotationError(f"RLE run #{i} must be a non-negative integer, got {run!r}")
        flat[total:total + run] = value
        total += run
        value = not value
    if total != height * width:
        raise AnnotationError(
            f"RLE runs sum to {total}, expected {height * width} for {height}x{width}")
    return flat.reshape(height, width)


@dataclass
class EntityAnnotation:
    """First-frame mask plus trajectory for one entity."""

    entity_id: str
    mask: np.ndarray = field(repr=False)       # (H, W) bool
    trajectory: np.ndarray = field(repr=False)  # (L, 2) float64, columns (x, y)
    frame_masks: np.ndarray | None = field(default=None, repr=False)  # (L, H, W) bool


@dataclass
class ClipAnnotation:
    width: int
    height: int
    frames: int
    entities: list[EntityAnnotation]

    def validate(self):
        for ent in self.entities:
            if ent.mask.shape != (self.height, self.width):
                raise AnnotationError(
                    f"entity {ent.entity_id!r}: mask shape {ent.mask.shape} does not match "
                    f"{self.height}x{self.width}")
            if ent.trajectory.shape != (self.frames, 2):
                raise AnnotationError(
                    f"entity {ent.entity_id!r}: trajectory has {ent.trajectory.shape[0]} "
                    f"points, expected frames={self.frames}")
            if ent.frame_masks is not None and ent.frame_masks.shape != (
                    self.frames, self.height, self.width):
                raise AnnotationError(
                    f"entity {ent.entity_id!r}: frame_masks shape {ent.frame_masks.shape} "
                    f"does not match (L, H, W)")
        return self


def annotation_to_dict(ann: ClipAnnotation) -> dict:
    ann.validate()
    entities = []
    for ent in ann.entities:
        doc = {
            "id": ent.entity_id,
            "mask_rle": rle_encode(ent.mask),
            "trajectory": [[float(x), float(y)] for x, y in ent.trajectory],
        }
        if ent.frame_masks is not None:
            doc["frame_masks_rle"] = [rle_encode(m) for m in ent.frame_masks]
        entities.append(doc)
    return {"width": ann.width, "height": ann.height, "frames": ann.frames,
            "entities": entities}


def annotation_from_dict(doc: dict) -> ClipAnnotation:
    if not isinstance(doc, dict):
        raise AnnotationError(f"annotation must be a JSON object, got {type(doc).__name__}")
    for key in FORMAT_KEYS:
        if key not in doc:
            raise AnnotationError(f"annotation is missing required key {key!r}")
    width, height, frames = doc["width"], doc["height"], doc["frames"]
    for name, value in (("width", width), ("height", height), ("frames", frames)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise AnnotationError(f"{name} must be a positive integer, got {value!r}")
    if not isinstance(doc["entities"], list):
        raise AnnotationError("entities must be a list")
    entities = []
    for i, ent in enumerate(doc["entities"]):
        where = f"entities[{i}]"
        if not isinstance(ent, dict):
            raise AnnotationError(f"{where} must be an object")
        for key in ("id", "mask_rle", "trajectory"):
            if key not in ent:
                raise AnnotationError(f"{where} is missing required key {key!r}")
        try:
            mask = rle_decode(ent["mask_rle"], height, width)
        except AnnotationError as exc:
            raise AnnotationError(f"{where}.mask_rle: {exc}") from exc
        traj = ent["trajectory"]
        if (not isinstance(traj, list)
                or any(not isinstance(p, list) or len(p) != 2 for p in traj)):
            raise AnnotationError(f"{where}.trajectory must be a list of [x, y] pairs")
        if len(traj) != frames:
            raise AnnotationError(
                f"{where}.trajectory has {len(traj)} points, expected frames={frames}")
        points = np.asarray(traj, dtype=np.float64)
        if not np.isfinite(points).all():
            raise AnnotationError(f"{where}.trajectory contains non-finite values")
        frame_masks = None
        if "frame_masks_rle" in ent:
            per_frame = ent["frame_masks_rle"]
            if not isinstance(per_frame, list) or len(per_frame) != frames:
                raise AnnotationError(f"{where}.frame_masks_rle must list one RLE per frame")
            try:
                frame_masks = np.stack([rle_decode(r, height, width) for r in per_frame])
            except AnnotationError as exc:
                raise AnnotationError(f"{where}.frame_masks_rle: {exc}") from exc
        entities.append(EntityAnnotation(
            entity_id=str(ent["id"]), mask=mask, trajectory=points,
            frame_masks=frame_masks))
    return ClipAnnotation(width=width, height=height, frames=frames,
                          entities=entities).validate()


def annotation_to_json(ann: ClipAnnotation) -> str:
    return json.dumps(annotation_to_dict(ann))


def annotation_from_json(text: str) -> ClipAnnotation:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"invalid JSON: {exc.msg}", offset=exc.pos) from exc
    return annotation_from_dict(doc)
