"""Masked-MSE denoising objective and a deterministic, resumable trainer.

Every stochastic draw (batch indices, timesteps, noise) comes from one torch
generator whose state is checkpointed, so a resumed run continues bit-exactly.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import Config
from .corpus import CorpusClip, TrainingSample, make_training_sample
from .denoiser import VideoDenoiser
from .errors import CheckpointLoadError, DegenerateBatchError
from .features import extract_entity_features
from .model import DragVideoModel, build_model
from .schedule import NoiseSchedule, forward_noise, make_schedule

CHECKPOINT_VERSION = 1


def masked_mse_loss(eps: torch.Tensor, eps_hat: torch.Tensor,
                    mask: torch.Tensor, strict: bool = False) -> torch.Tensor:
    """Mean over masked pixels of the channel-summed squared residual.

    ``eps`` and ``eps_hat`` are (B, C, L, H, W); ``mask`` is (B, L, H, W) and
    broadcasts over channels. An all-zero mask raises in strict mode and
    yields 0 (with zero gradient) otherwise.
    """
    if eps.shape != eps_hat.shape:
        raise ValueError(f"shapes differ: {tuple(eps.shape)} vs {tuple(eps_hat.shape)}")
    if mask.shape != (eps.shape[0], *eps.shape[2:]):
        raise ValueError(f"mask shape {tuple(mask.shape)} must be (B, L, H, W)")
    m = mask.to(eps.dtype)
    total = m.sum()
    if strict and total.item() == 0:
        raise DegenerateBatchError("loss mask is all-zero")
    residual = ((eps - eps_hat) ** 2).sum(dim=1)  # channel-summed per pixel
    return (m * residual).sum() / total.clamp(min=1.0)


@dataclass
class PreparedSample:
    """One training sample, converted to model-ready tensors."""

    x0: torch.Tensor          # (3, L, H, W)
    first_frame: torch.Tensor  # (3, H, W)
    entity_rep: torch.Tensor  # (C, L, H, W)
    gaussian_rep: torch.Tensor  # (1, L, H, W)
    loss_mask: torch.Tensor   # (L, H, W)
    sample: TrainingSample = field(repr=False)


def make_feature_extractor(config: Config) -> VideoDenoiser:
    """The frozen denoiser used for entity-feature extraction.

    Seeded independently of the trained model so train- and inference-time
    embeddings agree for the same checkpoint config.
    """
    torch.manual_seed(config.feature.seed)
    extractor = VideoDenoiser(config.model)
    extractor.eval().requires_grad_(False)
    return extractor


def prepare_sample(clip: CorpusClip, config: Config, extractor: VideoDenoiser,
                   schedule: NoiseSchedule) -> PreparedSample:
    ann = clip.annotation
    if any(e.frame_masks is None for e in ann.entities):
        raise ValueError(
            f"clip {clip.clip_id}: training needs per-frame entity masks "
            f"(frame_masks_rle) in the corpus annotation")
    masks = np.stack([e.mask for e in ann.entities])
    trajectories = np.stack([e.trajectory for e in ann.entities])
    frame_masks = np.stack([e.frame_masks for e in ann.entities])
    t_star = config.feature.resolve_t_star(schedule.num_steps)
    embeddings = extract_entity_features(
        clip.frames[0], masks, extractor, t_star, schedule,
        seed=config.feature.seed)
    sample = make_training_sample(
        clip.frames, masks, trajectories, embeddings, frame_masks,
        entity_ids=[e.entity_id for e in ann.entities])
    return PreparedSample(
        x0=torch.from_numpy(sample.clip.transpose(3, 0, 1, 2).copy()),
        first_frame=torch.from_numpy(sample.clip[0].transpose(2, 0, 1).copy()),
        entity_rep=torch.from_numpy(sample.entity_rep.transpose(3, 0, 1, 2).copy()),
        gaussian_rep=torch.from_numpy(sample.gaussian_rep[None].copy()),
        loss_mask=torch.from_numpy(sample.loss_mask.astype(np.float32)),
        sample=sample)


def prepare_corpus(corpus: list[CorpusClip], config: Config,
                   extractor: VideoDenoiser,
                   schedule: NoiseSchedule) -> list[PreparedSample]:
    if any(not c.annotation.entities for c in corpus):
        raise ValueError("training clips must have at least one entity")
    return [prepare_sample(c, config, extractor, schedule) for c in corpus]


@dataclass
class TrainerState:
    config: Config
    model: DragVideoModel
    optimizer: torch.optim.AdamW
    generator: torch.Generator
    schedule: NoiseSchedule
    samples: list[PreparedSample]
    step: int = 0
    losses: list[float] = field(default_factory=list)


def init_trainer(config: Config, corpus: list[CorpusClip]) -> TrainerState:
    if not corpus:
        raise ValueError("corpus is empty")
    schedule = make_schedule(config.schedule.T, config.schedule.kind)
    extractor = make_feature_extractor(config)
    samples = prepare_corpus(corpus, config, extractor, schedule)
    model = build_model(config, seed=config.train.seed)
    optimizer = torch.optim.AdamW(model.parameters(),
                                  lr=config.train.learning_rate,
                                  weight_decay=config.train.weight_decay)
    generator = torch.Generator().manual_seed(config.train.seed)
    return TrainerState(config=config, model=model, optimizer=optimizer,
                        generator=generator, schedule=schedule, samples=samples)


def train_step(state: TrainerState) -> float:
    """One AdamW update; returns the step's loss."""
    cfg = state.config.train
    n = len(state.samples)
    idx = torch.randint(0, n, (cfg.batch_size,), generator=state.generator)
    t = torch.randint(1, state.schedule.num_steps + 1, (cfg.batch_size,),
                      generator=state.generator)
    batch = [state.samples[i] for i in idx.tolist()]
    x0 = torch.stack([b.x0 for b in batch])
    noise = torch.randn(x0.shape, generator=state.generator)
    x_t = forward_noise(x0, t, noise, state.schedule)
    first_frame = torch.stack([b.first_frame for b in batch])
    entity_rep = torch.stack([b.entity_rep for b in batch])
    gaussian_rep = torch.stack([b.gaussian_rep for b in batch])
    if cfg.use_loss_mask:
        mask = torch.stack([b.loss_mask for b in batch])
        if cfg.background_weight > 0:  # weighted mean: background at reduced weight
            mask = mask + cfg.background_weight * (1.0 - mask)
    else:
        mask = torch.ones(x0.shape[0], *x0.shape[2:])

    eps_hat = state.model.predict_noise(
        x_t, t, first_frame, entity_rep, gaussian_rep,
        use_entity=cfg.use_entity, use_gaussian=cfg.use_gaussian)
    loss = masked_mse_loss(noise, eps_hat, mask)
    if not torch.isfinite(loss):
        raise RuntimeError(
            f"non-finite loss {loss.item()} at step {state.step + 1} "
            f"(lr={cfg.learning_rate}, batch indices {idx.tolist()})")
    state.optimizer.zero_grad()
    loss.backward()
    state.optimizer.step()
    state.step += 1
    value = float(loss.item())
    state.losses.append(value)
    return value


def save_checkpoint(state: TrainerState, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "step": state.step,
        "config": state.config.to_dict(),
        "model_state": state.model.state_dict(),
        "optimizer_state": state.optimizer.state_dict(),
        "generator_state": state.generator.get_state(),
        "losses": list(state.losses),
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def load_checkpoint_payload(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CheckpointLoadError(f"checkpoint {path} does not exist")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointLoadError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version") if isinstance(payload, dict) else None
    if version != CHECKPOINT_VERSION:
        raise CheckpointLoadError(
            f"checkpoint {path} has format version {version}, "
            f"this build reads {CHECKPOINT_VERSION}")
    return payload


def load_model(path) -> tuple[Config, DragVideoModel]:
    """Config and model weights only, for inference."""
    payload = load_checkpoint_payload(path)
    config = Config.from_dict(payload["config"])
    model = DragVideoModel(config)
    model.load_state_dict(payload["model_state"])
    model.eval()
    return config, model


def resume_trainer(path, corpus: list[CorpusClip]) -> TrainerState:
    payload = load_checkpoint_payload(path)
    config = Config.from_dict(payload["config"])
    state = init_trainer(config, corpus)
    state.model.load_state_dict(payload["model_state"])
    state.optimizer.load_state_dict(payload["optimizer_state"])
    state.generator.set_state(payload["generator_state"])
    state.step = payload["step"]
    state.losses = list(payload["losses"])
    return state


@dataclass
class TrainResult:
    checkpoint_path: Path
    losses: list[float]
    step: int


def run_training(config: Config, corpus: list[CorpusClip], out_dir,
                 resume_from=None, log_every: int = 0) -> TrainResult:
    """Train to ``config.train.steps``, checkpointing periodically."""
    out_dir = Path(out_dir)
    if resume_from is not None:
        state = resume_trainer(resume_from, corpus)
    else:
        state = init_trainer(config, corpus)
    cadence = config.train.checkpoint_every
    while state.step < config.train.steps:
        loss = train_step(state)
        if log_every and state.step % log_every == 0:
            print(f"step {state.step:6d}  loss {loss:.6f}")
        if cadence and state.step % cadence == 0 and state.step < config.train.steps:
            save_checkpoint(state, out_dir / f"ckpt_{state.step:06d}.pt")
    final = save_checkpoint(state, out_dir / "ckpt_final.pt")
    return TrainResult(checkpoint_path=final, losses=list(state.losses),
                       step=state.step)
