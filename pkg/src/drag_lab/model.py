"""Assembly of denoiser, guidance encoders, and control branch."""

from __future__ import annotations

import torch
from torch import nn

from .config import Config
from .denoiser import ControlBranch, VideoDenoiser
from .guidance import GuidanceEncoder, combine_guidance


class DragVideoModel(nn.Module):
    """Everything trainable: the denoiser, the two representation encoders,
    and the trainable copy of the encoder stages that builds the guidance
    pyramid."""

    def __init__(self, config: Config):
        super().__init__()
        self.config = config
        self.denoiser = VideoDenoiser(config.model)
        base = config.model.stage_channels[0]
        self.entity_encoder = GuidanceEncoder(config.model.feature_channels, base)
        self.gaussian_encoder = GuidanceEncoder(1, base)
        self.control = ControlBranch(self.denoiser)

    def combined_guidance(self, x_t: torch.Tensor, first_frame: torch.Tensor,
                          entity_rep=None, gaussian_rep=None,
                          use_entity: bool = True,
                          use_gaussian: bool = True) -> torch.Tensor:
        """R = E(entity rep) + E(gaussian rep) + Z, with ablatable terms."""
        z = self.denoiser.encode_latent(x_t, first_frame)
        zero = torch.zeros_like(z)
        entity_term = (self.entity_encoder(entity_rep)
                       if use_entity and entity_rep is not None else zero)
        gaussian_term = (self.gaussian_encoder(gaussian_rep)
                         if use_gaussian and gaussian_rep is not None else zero)
        return combine_guidance(entity_term, gaussian_term, z)

    def build_pyramid(self, r: torch.Tensor, t) -> list[torch.Tensor]:
        emb = self.denoiser.embed_time(t, r.shape[0], r.dtype, r.device)
        return self.control(r, emb)

    def predict_noise(self, x_t: torch.Tensor, t, first_frame: torch.Tensor,
                      entity_rep=None, gaussian_rep=None,
                      use_entity: bool = True,
                      use_gaussian: bool = True) -> torch.Tensor:
        r = self.combined_guidance(x_t, first_frame, entity_rep, gaussian_rep,
                                   use_entity=use_entity, use_gaussian=use_gaussian)
        pyramid = self.build_pyramid(r, t)
        return self.denoiser(x_t, t, first_frame, pyramid=pyramid)


def build_model(config: Config, seed: int | None = None) -> DragVideoModel:
    """Construct a model with deterministic initial weights."""
    if seed is not None:
        torch.manual_seed(seed)
    return DragVideoModel(config)
