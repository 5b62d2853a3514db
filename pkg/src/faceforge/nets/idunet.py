"""1D UNet noise predictor over identity-coefficient vectors.

Encoder: three down-blocks of three residual conv blocks each, followed by a
length-halving downsample; cross-attention sits inside the third down-block.
Middle: six residual blocks interleaved with six cross-attention layers.
Decoder mirrors the encoder with skip concatenation and cross-attention in the
first up-block, then a purely-residual tail.  Inputs are zero-padded to the
next multiple of 8 and the output is cropped back.
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import ParameterError
from .blocks import (
    CrossAttention,
    Downsample1d,
    ResBlock1d,
    TimeMLP,
    Upsample1d,
)


class _DownBlock(nn.Module):
    """Three residual conv blocks, then a length-halving downsample."""

    def __init__(self, c_in, c_out, t_dim, ctx_dim, heads, attend):
        super().__init__()
        self.res = nn.ModuleList(
            [ResBlock1d(c_in, c_out, t_dim)]
            + [ResBlock1d(c_out, c_out, t_dim) for _ in range(2)]
        )
        self.att = (
            nn.ModuleList([CrossAttention(c_out, ctx_dim, heads) for _ in range(3)])
            if attend
            else None
        )
        self.down = Downsample1d(c_out)

    def forward(self, x, temb, ctx):
        for i, res in enumerate(self.res):
            x = res(x, temb)
            if self.att is not None:
                x = self.att[i](x, ctx)
        return x, self.down(x)


class _UpBlock(nn.Module):
    """Length-doubling upsample, skip concatenation, three residual blocks."""

    def __init__(self, c_in, c_skip, c_out, t_dim, ctx_dim, heads, attend):
        super().__init__()
        self.up = Upsample1d(c_in)
        self.res = nn.ModuleList(
            [ResBlock1d(c_in + c_skip, c_out, t_dim)]
            + [ResBlock1d(c_out, c_out, t_dim) for _ in range(2)]
        )
        self.att = (
            nn.ModuleList([CrossAttention(c_out, ctx_dim, heads) for _ in range(3)])
            if attend
            else None
        )

    def forward(self, x, skip, temb, ctx):
        x = torch.cat([self.up(x), skip], dim=1)
        for i, res in enumerate(self.res):
            x = res(x, temb)
            if self.att is not None:
                x = self.att[i](x, ctx)
        return x


class IdentityUNet1d(nn.Module):
    def __init__(
        self,
        widths: tuple = (32, 64, 128),
        ctx_dim: int = 128,
        heads: int = 4,
        tail_blocks: int = 2,
    ):
        super().__init__()
        w1, w2, w3 = widths
        t_dim = w1 * 4
        self.time = TimeMLP(t_dim)
        self.stem = nn.Conv1d(1, w1, 3, padding=1)
        # cross-attention only in the third down-block
        self.down = nn.ModuleList(
            [
                _DownBlock(w1, w1, t_dim, ctx_dim, heads, attend=False),
                _DownBlock(w1, w2, t_dim, ctx_dim, heads, attend=False),
                _DownBlock(w2, w3, t_dim, ctx_dim, heads, attend=True),
            ]
        )
        self.mid_res = nn.ModuleList(
            [ResBlock1d(w3, w3, t_dim) for _ in range(6)]
        )
        self.mid_att = nn.ModuleList(
            [CrossAttention(w3, ctx_dim, heads) for _ in range(6)]
        )
        # cross-attention only in the first up-block
        self.up = nn.ModuleList(
            [
                _UpBlock(w3, w3, w3, t_dim, ctx_dim, heads, attend=True),
                _UpBlock(w3, w2, w2, t_dim, ctx_dim, heads, attend=False),
                _UpBlock(w2, w1, w1, t_dim, ctx_dim, heads, attend=False),
            ]
        )
        self.tail = nn.ModuleList(
            [ResBlock1d(w1, w1, t_dim) for _ in range(tail_blocks)]
        )
        self.out_norm = nn.GroupNorm(8, w1)
        self.head = nn.Conv1d(w1, 1, 3, padding=1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(
        self, h_t: torch.Tensor, t: torch.Tensor, ctx: torch.Tensor
    ) -> torch.Tensor:
        """epsilon-prediction; h_t (B, d) or (d,) -> same shape."""
        squeeze = h_t.dim() == 1
        if squeeze:
            h_t = h_t[None]
        if h_t.dim() != 2:
            raise ParameterError(f"expected (B, d) coefficients, got {tuple(h_t.shape)}")
        B, d = h_t.shape
        if t.dim() == 0:
            t = t[None].expand(B)
        if ctx.dim() == 2:
            ctx = ctx[None].expand(B, -1, -1)
        pad = (-d) % 8
        x = torch.nn.functional.pad(h_t, (0, pad))[:, None, :]  # (B, 1, d+pad)
        temb = self.time(t)

        x = self.stem(x)
        skips = []
        for block in self.down:
            skip, x = block(x, temb, ctx)
            skips.append(skip)
        for res, att in zip(self.mid_res, self.mid_att):
            x = att(res(x, temb), ctx)
        for block in self.up:
            x = block(x, skips.pop(), temb, ctx)
        for res in self.tail:
            x = res(x, temb)
        out = self.head(torch.nn.functional.silu(self.out_norm(x)))[:, 0, :d]
        return out[0] if squeeze else out
