"""Image/text dual encoder and the texture quality classifier.

The dual encoder maps rendered images and prompts into a shared unit-norm
embedding space (contrastive alignment scoring); the quality classifier is a
small convnet + MLP over pooled features emitting a clean-vs-flawed logit.
"""

from __future__ import annotations

import torch
from torch import nn

from .textenc import TextEncoder


def _conv_stack(widths: tuple) -> nn.Sequential:
    layers: list[nn.Module] = []
    c_in = 3
    for w in widths:
        layers += [
            nn.Conv2d(c_in, w, 3, stride=2, padding=1),
            nn.GroupNorm(min(8, w), w),
            nn.SiLU(),
        ]
        c_in = w
    layers.append(nn.AdaptiveAvgPool2d(1))
    return nn.Sequential(*layers)


class DualEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        embed_dim: int = 64,
        image_widths: tuple = (32, 64, 128),
        text_width: int = 128,
    ):
        super().__init__()
        self.embed_dim = embed_dim
        self.image_net = _conv_stack(image_widths)
        self.image_proj = nn.Linear(image_widths[-1], embed_dim)
        self.text_net = TextEncoder(vocab_size, width=text_width)
        self.text_proj = nn.Linear(text_width, embed_dim)
        self.logit_scale = nn.Parameter(torch.tensor(2.0))

    def encode_image(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, D) unit-norm embeddings."""
        h = self.image_net(images).flatten(1)
        return torch.nn.functional.normalize(self.image_proj(h), dim=-1)

    def encode_text(self, token_ids: torch.Tensor) -> torch.Tensor:
        """(B, L) tokens -> (B, D) unit-norm embeddings (mean-pooled)."""
        h = self.text_net(token_ids).mean(dim=-2)
        return torch.nn.functional.normalize(self.text_proj(h), dim=-1)

    def similarity(self, images: torch.Tensor, token_ids: torch.Tensor) -> torch.Tensor:
        """Cosine similarity per pair, in [-1, 1]."""
        return (self.encode_image(images) * self.encode_text(token_ids)).sum(-1)


class QualityClassifier(nn.Module):
    def __init__(self, widths: tuple = (16, 32, 64), hidden: int = 64):
        super().__init__()
        self.features = _conv_stack(widths)
        self.mlp = nn.Sequential(
            nn.Linear(widths[-1], hidden), nn.SiLU(), nn.Linear(hidden, 1)
        )
        self.threshold = 0.5  # records scoring below this are rejected

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B,) logits; positive = clean."""
        return self.mlp(self.features(images).flatten(1))[:, 0]

    def score(self, images: torch.Tensor) -> torch.Tensor:
        """Clean probability in [0, 1]."""
        return torch.sigmoid(self(images))
