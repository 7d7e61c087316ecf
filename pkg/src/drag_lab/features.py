"""Entity embeddings pooled from denoiser features of the noised first frame.

One forward pass of the denoiser on x_{t*} yields a full-resolution feature
map; each entity's embedding is the mean of that map over its mask.
"""

from __future__ import annotations

import numpy as np
import torch

from .denoiser import VideoDenoiser
from .errors import InvalidEntityError
from .schedule import NoiseSchedule, forward_noise


def pool_embeddings(feature_map: np.ndarray, masks) -> np.ndarray:
    """Average an (H, W, C) feature map over each boolean mask -> (K, C)."""
    fmap = np.asarray(feature_map, dtype=np.float64)
    if fmap.ndim != 3:
        raise ValueError(f"feature map must be (H, W, C), got {fmap.shape}")
    embeddings = []
    for k, mask in enumerate(masks):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != fmap.shape[:2]:
            raise ValueError(f"mask {k} shape {mask.shape} does not match "
                             f"feature map {fmap.shape[:2]}")
        if not mask.any():
            raise InvalidEntityError(f"mask {k} has no foreground pixels")
        embeddings.append(fmap[mask].mean(axis=0))
    if not embeddings:
        return np.zeros((0, fmap.shape[2]), dtype=np.float32)
    return np.stack(embeddings).astype(np.float32)


def extract_entity_features(image: np.ndarray, masks, denoiser: VideoDenoiser,
                            t_star: int, schedule: NoiseSchedule,
                            seed: int = 0) -> np.ndarray:
    """Pool per-entity embeddings from one denoiser forward pass.

    ``image`` is the (H, W, 3) first frame in [0, 1]; ``masks`` is a sequence
    of (H, W) boolean grids. Returns (K, C) float32 embeddings, deterministic
    for a fixed seed.
    """
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"image must be (H, W, 3), got {image.shape}")
    x0 = torch.from_numpy(image).permute(2, 0, 1)[None, :, None]  # (1, 3, 1, H, W)
    generator = torch.Generator().manual_seed(seed)
    noise = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x_t = forward_noise(x0, t_star, noise, schedule)
    first_frame = x0[:, :, 0]
    with torch.no_grad():
        fmap = denoiser.features(x_t, t_star, first_frame)[0, :, 0]  # (C, H, W)
    return pool_embeddings(fmap.permute(1, 2, 0).numpy(), masks)
