"""Convolutional variational autoencoder compressing UV textures by 8x.

Encodes (B, 3, R, R) textures to a 4-channel latent at R/8; the decoder ends
in a sigmoid so outputs stay in [0, 1].
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ParameterError

LOGVAR_MIN, LOGVAR_MAX = -30.0, 20.0


def _down(c_in, c_out):
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, stride=2, padding=1),
        nn.GroupNorm(min(8, c_out), c_out),
        nn.SiLU(),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.GroupNorm(min(8, c_out), c_out),
        nn.SiLU(),
    )


def _up(c_in, c_out):
    return nn.Sequential(
        nn.Upsample(scale_factor=2, mode="nearest"),
        nn.Conv2d(c_in, c_out, 3, padding=1),
        nn.GroupNorm(min(8, c_out), c_out),
        nn.SiLU(),
        nn.Conv2d(c_out, c_out, 3, padding=1),
        nn.GroupNorm(min(8, c_out), c_out),
        nn.SiLU(),
    )


class TextureVAE(nn.Module):
    def __init__(self, latent_channels: int = 4, widths: tuple = (32, 64, 128)):
        super().__init__()
        self.latent_channels = latent_channels
        w1, w2, w3 = widths
        self.encoder = nn.Sequential(
            nn.Conv2d(3, w1, 3, padding=1),
            nn.SiLU(),
            _down(w1, w1),
            _down(w1, w2),
            _down(w2, w3),
            nn.Conv2d(w3, 2 * latent_channels, 1),
        )
        self.decoder = nn.Sequential(
            nn.Conv2d(latent_channels, w3, 1),
            _up(w3, w2),
            _up(w2, w1),
            _up(w1, w1),
            nn.Conv2d(w1, 3, 3, padding=1),
        )

    def encode(self, texture: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, 3, R, R) -> mean, logvar each (B, 4, R/8, R/8)."""
        if texture.dim() != 4 or texture.shape[1] != 3:
            raise ParameterError(f"expected (B, 3, R, R), got {tuple(texture.shape)}")
        if texture.shape[-1] % 8 or texture.shape[-2] % 8:
            raise ParameterError("texture resolution must be divisible by 8")
        mean, logvar = self.encoder(texture).chunk(2, dim=1)
        return mean, logvar.clamp(LOGVAR_MIN, LOGVAR_MAX)

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        """(B, 4, H, W) -> (B, 3, 8H, 8W) in [0, 1]."""
        if latent.dim() != 4 or latent.shape[1] != self.latent_channels:
            raise ParameterError(
                f"expected (B, {self.latent_channels}, H, W), got {tuple(latent.shape)}"
            )
        return torch.sigmoid(self.decoder(latent))

    def reparameterize(
        self, mean: torch.Tensor, logvar: torch.Tensor, noise: torch.Tensor
    ) -> torch.Tensor:
        """z = mean + exp(logvar/2) * noise, with caller-supplied noise."""
        return mean + torch.exp(0.5 * logvar) * noise

    @staticmethod
    def kl(mean: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
        """Mean KL(q || N(0, I)) per batch element, averaged over the batch."""
        per = 0.5 * (mean.pow(2) + logvar.exp() - 1.0 - logvar)
        return per.flatten(1).sum(dim=1).mean()
