"""Closed-vocabulary text encoder producing cross-attention embeddings.

Learned token embedding + learned positional encoding + a small pre-norm
self-attention encoder.  The empty sequence maps to a single dedicated learned
null row (the unconditional embedding of classifier-free guidance).
"""

from __future__ import annotations

import torch
from torch import nn

from ..errors import VocabularyError
from ..vocab import MAX_TOKENS


class TextEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        width: int = 128,
        layers: int = 2,
        heads: int = 4,
        max_tokens: int = MAX_TOKENS,
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.width = width
        self.max_tokens = max_tokens
        self.token_embed = nn.Embedding(vocab_size, width)
        self.pos_embed = nn.Parameter(torch.zeros(max_tokens, width))
        layer = nn.TransformerEncoderLayer(
            d_model=width,
            nhead=heads,
            dim_feedforward=4 * width,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=layers, enable_nested_tensor=False
        )
        self.null_embed = nn.Parameter(torch.zeros(1, width))
        nn.init.normal_(self.pos_embed, std=0.02)
        nn.init.normal_(self.null_embed, std=0.02)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        """(B, L) int tokens -> (B, L, width); (L,) -> (L, width).

        An empty sequence returns the learned null row, shape (1, width).
        """
        squeeze = token_ids.dim() == 1
        if squeeze:
            token_ids = token_ids[None]
        B, L = token_ids.shape
        if L == 0:
            out = self.null_embed[None].expand(B, 1, self.width)
            return out[0] if squeeze else out
        if L > self.max_tokens:
            raise VocabularyError(f"sequence length {L} exceeds {self.max_tokens}")
        if token_ids.min() < 0 or token_ids.max() >= self.vocab_size:
            raise VocabularyError("token id out of vocabulary range")
        h = self.token_embed(token_ids) + self.pos_embed[:L][None]
        out = self.encoder(h)
        return out[0] if squeeze else out

    def null_embedding(self) -> torch.Tensor:
        """The unconditional (empty-prompt) embedding, shape (1, width)."""
        return self(torch.zeros(0, dtype=torch.long))


def encode_prompt(encoder: TextEncoder, prompt: str) -> torch.Tensor:
    """Tokenize and encode a prompt; the empty prompt yields the null row."""
    from ..vocab import tokenize

    ids = tokenize(prompt) if prompt else []
    return encoder(torch.tensor(ids, dtype=torch.long))
