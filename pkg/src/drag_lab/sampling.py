"""Reverse-diffusion sampling conditioned on user masks and trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .annotations import EntityAnnotation
from .config import Config
from .corpus import anchor_trajectory
from .features import extract_entity_features
from .model import DragVideoModel
from .representation import Trajectory, build_representation_sequences, compute_incircle
from .schedule import make_schedule
from .training import load_model, make_feature_extractor


@dataclass
class GenerationRequest:
    first_frame: np.ndarray = field(repr=False)  # (H, W, 3) float in [0, 1]
    entities: list[EntityAnnotation] = field(default_factory=list)
    steps: int | None = None  # sampler steps; None = full schedule
    seed: int = 0


@dataclass
class SampleResult:
    frames: np.ndarray = field(repr=False)  # (L, H, W, 3) float32 in [0, 1]
    anchored_trajectories: np.ndarray = field(repr=False)  # (K, L, 2)
    entity_ids: list[str] = field(default_factory=list)


def _sampling_timesteps(num_steps: int, requested: int | None) -> list[int]:
    """Strictly decreasing timesteps from T down to 1."""
    if requested is None or requested >= num_steps:
        return list(range(num_steps, 0, -1))
    if requested < 1:
        raise ValueError(f"sampler steps must be >= 1, got {requested}")
    ts = np.unique(np.linspace(1, num_steps, requested).round().astype(int))
    return [int(t) for t in ts[::-1]]


def build_request_conditioning(request: GenerationRequest, config: Config,
                               extractor) -> tuple:
    """Entity/Gaussian representation sequences for a user request.

    Embeddings come from the frozen feature extractor on the first frame;
    each trajectory is re-anchored to its entity's incircle center, exactly
    as during training.
    """
    data = config.data
    schedule = make_schedule(config.schedule.T, config.schedule.kind)
    anchored = np.zeros((len(request.entities), data.length, 2))
    if not request.entities:
        ent = np.zeros((data.length, data.height, data.width,
                        config.model.feature_channels), dtype=np.float32)
        gauss = np.zeros((data.length, data.height, data.width), dtype=np.float32)
        return ent, gauss, anchored
    masks = [e.mask for e in request.entities]
    t_star = config.feature.resolve_t_star(schedule.num_steps)
    embeddings = extract_entity_features(request.first_frame, masks, extractor,
                                         t_star, schedule,
                                         seed=config.feature.seed)
    triples = []
    for k, entity in enumerate(request.entities):
        if entity.trajectory.shape[0] != data.length:
            raise ValueError(
                f"entity {entity.entity_id!r}: trajectory has "
                f"{entity.trajectory.shape[0]} points, expected {data.length}")
        circle = compute_incircle(entity.mask)
        anchored[k] = anchor_trajectory(entity.trajectory, circle.center)
        triples.append((embeddings[k],
                        Trajectory(entity.entity_id, anchored[k]), circle.radius))
    ent, gauss = build_representation_sequences(
        triples, data.length, data.height, data.width,
        config.model.feature_channels)
    return ent, gauss, anchored


def sample_video(request: GenerationRequest, checkpoint) -> SampleResult:
    """Ancestral DDPM sampling from pure noise, deterministic per seed.

    ``checkpoint`` is a checkpoint path or a preloaded (config, model) pair.
    """
    if isinstance(checkpoint, (str, Path)):
        config, model = load_model(checkpoint)
    else:
        config, model = checkpoint
    return _sample(request, config, model)


@torch.no_grad()
def _sample(request: GenerationRequest, config: Config,
            model: DragVideoModel) -> SampleResult:
    data = config.data
    frame = np.asarray(request.first_frame, dtype=np.float32)
    if frame.shape != (data.height, data.width, 3):
        raise ValueError(f"first frame shape {frame.shape} does not match "
                         f"configured ({data.height}, {data.width}, 3)")
    extractor = make_feature_extractor(config)
    ent, gauss, anchored = build_request_conditioning(request, config, extractor)
    schedule = make_schedule(config.schedule.T, config.schedule.kind)
    flags = config.train
    has_entities = bool(request.entities)
    entity_rep = (torch.from_numpy(ent.transpose(3, 0, 1, 2).copy())[None]
                  if has_entities else None)
    gaussian_rep = (torch.from_numpy(gauss[None].copy())[None]
                    if has_entities else None)
    first_frame = torch.from_numpy(frame.transpose(2, 0, 1).copy())[None]

    generator = torch.Generator().manual_seed(request.seed)
    x = torch.randn((1, 3, data.length, data.height, data.width),
                    generator=generator)
    timesteps = _sampling_timesteps(schedule.num_steps, request.steps)
    for i, t_cur in enumerate(timesteps):
        t_prev = timesteps[i + 1] if i + 1 < len(timesteps) else 0
        eps = model.predict_noise(x, t_cur, first_frame, entity_rep, gaussian_rep,
                                  use_entity=flags.use_entity,
                                  use_gaussian=flags.use_gaussian)
        ab_cur = schedule.alpha_bar_at(t_cur)
        ab_prev = schedule.alpha_bar_at(t_prev)
        x0_hat = (x - np.sqrt(1.0 - ab_cur) * eps) / np.sqrt(ab_cur)
        x0_hat = x0_hat.clamp(0.0, 1.0)  # frames live in [0, 1]
        var = (1.0 - ab_prev) / (1.0 - ab_cur) * (1.0 - ab_cur / ab_prev)
        var = float(max(var, 0.0))
        dir_coeff = np.sqrt(max(1.0 - ab_prev - var, 0.0))
        x = np.sqrt(ab_prev) * x0_hat + dir_coeff * eps
        if t_prev > 0 and var > 0:
            x = x + np.sqrt(var) * torch.randn(x.shape, generator=generator)
    frames = x[0].permute(1, 2, 3, 0).clamp(0.0, 1.0).numpy().astype(np.float32)
    return SampleResult(frames=frames, anchored_trajectories=anchored,
                        entity_ids=[e.entity_id for e in request.entities])
