"""Neural components: texture VAE, conditional denoisers, text encoders."""

from .blocks import (
    CrossAttention,
    ResBlock1d,
    ResBlock2d,
    TimeMLP,
    timestep_embedding,
)
from .dualenc import DualEncoder, QualityClassifier
from .idunet import IdentityUNet1d
from .textenc import TextEncoder, encode_prompt
from .unet2d import ConditionalUNet2d
from .vae import LOGVAR_MAX, LOGVAR_MIN, TextureVAE

__all__ = [
    "CrossAttention",
    "ResBlock1d",
    "ResBlock2d",
    "TimeMLP",
    "timestep_embedding",
    "DualEncoder",
    "QualityClassifier",
    "IdentityUNet1d",
    "TextEncoder",
    "encode_prompt",
    "ConditionalUNet2d",
    "TextureVAE",
    "LOGVAR_MAX",
    "LOGVAR_MIN",
]
