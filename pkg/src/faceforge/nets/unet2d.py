"""Conditional 2D UNet noise predictor over texture latents.

Input is the 8-channel concatenation of the noisy latent and the incomplete-
texture latent; text conditioning enters through cross-attention at every
resolution, the timestep through sinusoidal embedding + scale-shift.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ParameterError
from .blocks import (
    CrossAttention,
    Downsample2d,
    ResBlock2d,
    TimeMLP,
    Upsample2d,
)


class ConditionalUNet2d(nn.Module):
    def __init__(
        self,
        latent_channels: int = 4,
        widths: tuple = (64, 128, 256),
        ctx_dim: int = 128,
        heads: int = 4,
    ):
        super().__init__()
        self.latent_channels = latent_channels
        w1, w2, w3 = widths
        t_dim = w1 * 4
        self.time = TimeMLP(t_dim)
        self.stem = nn.Conv2d(2 * latent_channels, w1, 3, padding=1)

        self.down_res = nn.ModuleList(
            [ResBlock2d(w1, w1, t_dim), ResBlock2d(w1, w2, t_dim), ResBlock2d(w2, w3, t_dim)]
        )
        self.down_att = nn.ModuleList(
            [CrossAttention(w, ctx_dim, heads) for w in (w1, w2, w3)]
        )
        self.down_samp = nn.ModuleList([Downsample2d(w1), Downsample2d(w2), nn.Identity()])

        self.mid1 = ResBlock2d(w3, w3, t_dim)
        self.mid_att = CrossAttention(w3, ctx_dim, heads)
        self.mid2 = ResBlock2d(w3, w3, t_dim)

        self.up_samp = nn.ModuleList([nn.Identity(), Upsample2d(w3), Upsample2d(w2)])
        self.up_res = nn.ModuleList(
            [
                ResBlock2d(w3 + w3, w3, t_dim),
                ResBlock2d(w3 + w2, w2, t_dim),
                ResBlock2d(w2 + w1, w1, t_dim),
            ]
        )
        self.up_att = nn.ModuleList(
            [CrossAttention(w, ctx_dim, heads) for w in (w3, w2, w1)]
        )

        self.out_norm = nn.GroupNorm(8, w1)
        self.head = nn.Conv2d(w1, latent_channels, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(
        self,
        z_t: torch.Tensor,
        cond_latent: torch.Tensor,
        t: torch.Tensor,
        ctx: torch.Tensor,
    ) -> torch.Tensor:
        """epsilon-prediction; z_t, cond_latent (B, 4, H, W); ctx (B, L, D)."""
        if z_t.shape != cond_latent.shape:
            raise ParameterError(
                f"latent shapes differ: {tuple(z_t.shape)} vs {tuple(cond_latent.shape)}"
            )
        if z_t.shape[1] != self.latent_channels:
            raise ParameterError(f"expected {self.latent_channels} latent channels")
        if t.dim() == 0:
            t = t[None].expand(z_t.shape[0])
        if ctx.dim() == 2:
            ctx = ctx[None].expand(z_t.shape[0], -1, -1)
        temb = self.time(t)

        h = self.stem(torch.cat([z_t, cond_latent], dim=1))
        skips = []
        for res, att, samp in zip(self.down_res, self.down_att, self.down_samp):
            h = att(res(h, temb), ctx)
            skips.append(h)
            h = samp(h)

        h = self.mid2(self.mid_att(self.mid1(h, temb), ctx), temb)

        for res, att, samp in zip(self.up_res, self.up_att, self.up_samp):
            h = samp(h)
            h = att(res(torch.cat([h, skips.pop()], dim=1), temb), ctx)

        return self.head(torch.nn.functional.silu(self.out_norm(h)))
