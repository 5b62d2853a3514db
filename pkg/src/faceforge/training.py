"""Training loops for the VAE and the two denoisers, plus sampling wrappers.

All loops are seed-deterministic: model init, batching, timestep draws, noise,
prompt shuffling, and condition dropping are derived from the config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .diffusion import GuidanceConfig, NoiseSchedule, build_schedule, pnm_sample
from .errors import ConfigurationError, ParameterError, TrainingDivergence
from .nets import ConditionalUNet2d, IdentityUNet1d, TextEncoder, TextureVAE
from .synthface import Camera, build_mesh, default_shape_model, geo_clauses
from .uvpipeline import unwrap
from .vocab import MAX_TOKENS, tokenize, vocab_size


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    steps: int = 2000
    lr: float = 1e-4
    p_drop: float = 0.1
    seed: int = 0
    log_interval: int = 10
    max_tokens: int = MAX_TOKENS
    beta_kl: float = 1e-6
    grad_clip: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_drop <= 1.0:
            raise ConfigurationError(f"p_drop must be in [0, 1], got {self.p_drop}")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigurationError("steps and batch_size must be positive")


@dataclass
class LossTrace:
    steps: list = field(default_factory=list)
    losses: list = field(default_factory=list)

    def append(self, step: int, loss: float) -> None:
        if not np.isfinite(loss):
            raise TrainingDivergence(f"non-finite loss {loss} at step {step}")
        self.steps.append(step)
        self.losses.append(float(loss))

    def mean_over(self, first: int | None = None, last: int | None = None) -> float:
        vals = self.losses
        if first is not None:
            vals = vals[:first]
        if last is not None:
            vals = vals[-last:]
        return float(np.mean(vals))

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "loss"])
            w.writerows(zip(self.steps, self.losses))


def clause_shuffle(prompt: str, seed: int, max_tokens: int = MAX_TOKENS) -> list[int]:
    """Randomly permute clauses, keep a prefix within the token budget, tokenize."""
    if not prompt:
        return []
    clauses = [c.strip() for c in prompt.split(",") if c.strip()]
    rng = np.random.default_rng(np.random.SeedSequence([0x5F0F, seed]))
    order = rng.permutation(len(clauses))
    kept: list[str] = []
    for i in order:
        candidate = kept + [clauses[i]]
        if len(tokenize(", ".join(candidate))) <= max_tokens:
            kept = candidate
    return tokenize(", ".join(kept))


def drop_conditions(
    y: torch.Tensor,
    l: torch.Tensor,
    null_y: torch.Tensor,
    p_drop: float,
    seed: int,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Independently replace the text embedding / image latent with their nulls."""
    rng = np.random.default_rng(np.random.SeedSequence([0xD409, seed]))
    drop_text, drop_image = rng.uniform(size=2) < p_drop
    if drop_text:
        # repeating the null row leaves attention output identical to a
        # single-row null context, so shapes stay batch-friendly
        y = null_y.expand(y.shape[-2], -1) if y.dim() == 2 else null_y[None].expand(
            y.shape[0], y.shape[1], -1
        )
    if drop_image:
        l = torch.zeros_like(l)
    return y, l


def pad_tokens(ids: list[int], length: int = MAX_TOKENS) -> list[int]:
    """Right-pad with the PAD id so every encoded prompt has a fixed length."""
    if len(ids) > length:
        raise ParameterError(f"sequence of {len(ids)} tokens exceeds {length}")
    return ids + [0] * (length - len(ids))


def _texture_batch(dataset) -> torch.Tensor:
    """(N, 3, R, R) float tensor from records or raw (R, R, 3) arrays."""
    arrs = []
    for item in dataset:
        tex = item.uv_gt if hasattr(item, "uv_gt") else item
        if tex is None:
            raise ParameterError("record has no ground-truth texture")
        arrs.append(np.asarray(tex, dtype=np.float32).transpose(2, 0, 1))
    if not arrs:
        raise ParameterError("dataset is empty")
    return torch.from_numpy(np.stack(arrs))


def train_vae(dataset, cfg: TrainConfig) -> tuple[TextureVAE, LossTrace]:
    """L1 reconstruction + beta_kl * KL, plain adaptive-moment optimizer."""
    data = _texture_batch(dataset)
    torch.manual_seed(cfg.seed)
    model = TextureVAE()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.5, 0.9))
    rng = np.random.default_rng(np.random.SeedSequence([0xAE0, cfg.seed]))
    gen = torch.Generator().manual_seed(cfg.seed)
    trace = LossTrace()
    for step in range(cfg.steps):
        idx = rng.integers(0, data.shape[0], cfg.batch_size)
        x = data[idx]
        mean, logvar = model.encode(x)
        noise = torch.randn(mean.shape, generator=gen)
        recon = model.decode(model.reparameterize(mean, logvar, noise))
        loss = (recon - x).abs().mean() + cfg.beta_kl * model.kl(mean, logvar)
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
        opt.step()
        trace.append(step, loss.item())
    return model, trace


@dataclass
class TextureDiffusion:
    """Trained TDM: denoiser + text encoder + frozen VAE + latent scaling."""

    unet: ConditionalUNet2d
    text_encoder: TextEncoder
    vae: TextureVAE
    latent_scale: float
    schedule: NoiseSchedule


@dataclass
class GeometryDiffusion:
    """Trained GDM: 1D denoiser + text encoder + coefficient standardization."""

    net: IdentityUNet1d
    text_encoder: TextEncoder
    alpha_mean: np.ndarray
    alpha_std: np.ndarray
    schedule: NoiseSchedule


def encode_texture_latent(vae: TextureVAE, texture: np.ndarray) -> torch.Tensor:
    """Posterior-mean latent of an (R, R, 3) texture, shape (4, R/8, R/8)."""
    x = torch.from_numpy(
        np.asarray(texture, dtype=np.float32).transpose(2, 0, 1)
    )[None]
    with torch.no_grad():
        mean, _ = vae.encode(x)
    return mean[0]


def incomplete_latents(records, vae: TextureVAE, shape_model=None) -> list:
    """Per record: posterior-mean latents of each relit view's unwrap."""
    shape_model = shape_model or default_shape_model()
    out = []
    for rec in records:
        mesh = build_mesh(rec.alpha, shape_model)
        latents = []
        for rv in rec.relit:
            part = unwrap(rv.image, mesh, rv.camera)
            latents.append(encode_texture_latent(vae, part.texture))
        out.append(latents)
    return out


def train_tdm(
    dataset, vae: TextureVAE, cfg: TrainConfig
) -> tuple[TextureDiffusion, LossTrace]:
    """Latent noise-prediction training with prompt shuffling and dropping."""
    if not dataset:
        raise ParameterError("dataset is empty")
    for rec in dataset:
        if rec.uv_gt is None or not rec.relit:
            raise ConfigurationError("TDM training needs textures and relit views")
    vae = vae.eval()
    for p in vae.parameters():
        p.requires_grad_(False)
    probe = encode_texture_latent(vae, dataset[0].uv_gt)
    if probe.shape[0] != 4:
        raise ConfigurationError(f"VAE latent has {probe.shape[0]} channels, need 4")

    z0 = torch.stack([encode_texture_latent(vae, r.uv_gt) for r in dataset])
    cond = incomplete_latents(dataset, vae)
    scale = float(1.0 / z0.std())
    z0 = z0 * scale
    cond = [[l * scale for l in ls] for ls in cond]

    sched = build_schedule()
    abar = torch.from_numpy(sched.alphas_cumprod.astype(np.float32))
    torch.manual_seed(cfg.seed)
    unet = ConditionalUNet2d()
    tenc = TextEncoder(vocab_size())
    opt = torch.optim.AdamW(
        list(unet.parameters()) + list(tenc.parameters()),
        lr=cfg.lr,
        betas=(0.9, 0.999),
        weight_decay=0.01,
    )
    rng = np.random.default_rng(np.random.SeedSequence([0x7D0, cfg.seed]))
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    trace = LossTrace()
    N = len(dataset)
    for step in range(cfg.steps):
        idx = rng.integers(0, N, cfg.batch_size)
        tok = torch.tensor(
            [
                pad_tokens(
                    clause_shuffle(
                        dataset[i].prompt, int(rng.integers(1 << 31)), cfg.max_tokens
                    ),
                    cfg.max_tokens,
                )
                for i in idx
            ],
            dtype=torch.long,
        )
        ctx = tenc(tok)
        null = tenc.null_embedding()
        ls, ctxs = [], []
        for k, i in enumerate(idx):
            l = cond[i][int(rng.integers(len(cond[i])))]
            y_k, l_k = drop_conditions(
                ctx[k], l, null, cfg.p_drop, int(rng.integers(1 << 31))
            )
            ctxs.append(y_k)
            ls.append(l_k)
        ctx = torch.stack(ctxs)
        l = torch.stack(ls)
        t = torch.from_numpy(rng.integers(1, sched.num_steps + 1, cfg.batch_size))
        eps = torch.randn(z0[idx].shape, generator=gen)
        a = abar[t - 1][:, None, None, None]
        z_t = a.sqrt() * z0[idx] + (1 - a).sqrt() * eps
        loss = (unet(z_t, l, t, ctx) - eps).pow(2).mean()
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(
            list(unet.parameters()) + list(tenc.parameters()), cfg.grad_clip
        )
        opt.step()
        trace.append(step, loss.item())
    model = TextureDiffusion(
        unet=unet, text_encoder=tenc, vae=vae, latent_scale=scale, schedule=sched
    )
    return model, trace


def train_gdm(dataset, cfg: TrainConfig) -> tuple[GeometryDiffusion, LossTrace]:
    """Coefficient-space noise prediction conditioned on the geometry clauses."""
    if not dataset:
        raise ParameterError("dataset is empty")
    alpha = np.stack([r.alpha for r in dataset]).astype(np.float32)
    mean = alpha.mean(axis=0)
    std = alpha.std(axis=0) + 1e-8
    h0 = torch.from_numpy((alpha - mean) / std)
    prompts = [geo_clauses(r.prompt) for r in dataset]

    sched = build_schedule()
    abar = torch.from_numpy(sched.alphas_cumprod.astype(np.float32))
    torch.manual_seed(cfg.seed)
    net = IdentityUNet1d()
    tenc = TextEncoder(vocab_size())
    opt = torch.optim.AdamW(
        list(net.parameters()) + list(tenc.parameters()),
        lr=cfg.lr,
        betas=(0.9, 0.999),
        weight_decay=0.01,
    )
    rng = np.random.default_rng(np.random.SeedSequence([0x6D0, cfg.seed]))
    gen = torch.Generator().manual_seed(cfg.seed + 1)
    trace = LossTrace()
    N = len(dataset)
    for step in range(cfg.steps):
        idx = rng.integers(0, N, cfg.batch_size)
        tok = torch.tensor(
            [
                pad_tokens(
                    clause_shuffle(prompts[i], int(rng.integers(1 << 31)), cfg.max_tokens),
                    cfg.max_tokens,
                )
                for i in idx
            ],
            dtype=torch.long,
        )
        ctx = tenc(tok)
        null = tenc.null_embedding()
        drop = np.random.default_rng(
            np.random.SeedSequence([0xD409, cfg.seed, step])
        ).uniform(size=cfg.batch_size) < cfg.p_drop
        if drop.any():
            ctx = ctx.clone()
            ctx[torch.from_numpy(drop)] = null[None].expand(
                int(drop.sum()), ctx.shape[1], -1
            )
        t = torch.from_numpy(rng.integers(1, sched.num_steps + 1, cfg.batch_size))
        eps = torch.randn(h0[idx].shape, generator=gen)
        a = abar[t - 1][:, None]
        h_t = a.sqrt() * h0[idx] + (1 - a).sqrt() * eps
        loss = (net(h_t, t, ctx) - eps).pow(2).mean()
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(
            list(net.parameters()) + list(tenc.parameters()), cfg.grad_clip
        )
        opt.step()
        trace.append(step, loss.item())
    model = GeometryDiffusion(
        net=net, text_encoder=tenc, alpha_mean=mean, alpha_std=std, schedule=sched
    )
    return model, trace


TDM_GUIDANCE = GuidanceConfig(scale=6.0, sampler_steps=100)
GDM_GUIDANCE = GuidanceConfig(scale=1.5, sampler_steps=200)


def tdm_sample(
    model: TextureDiffusion,
    prompt: str,
    image_latent: torch.Tensor | None = None,
    guidance: GuidanceConfig = TDM_GUIDANCE,
    seed: int = 0,
    shuffle_seed: int | None = None,
) -> np.ndarray:
    """Generate one texture; the image latent (if any) must be pre-scaled.

    ``shuffle_seed`` applies the training-time clause shuffle to the prompt.
    """
    model.unet.eval()
    model.text_encoder.eval()
    with torch.no_grad():
        if prompt:
            ids = (
                clause_shuffle(prompt, shuffle_seed)
                if shuffle_seed is not None
                else tokenize(prompt)
            )
            ctx = model.text_encoder(
                torch.tensor(pad_tokens(ids), dtype=torch.long)
            )
        else:
            ctx = model.text_encoder.null_embedding()
        null = model.text_encoder.null_embedding()
        l = (
            image_latent
            if image_latent is not None
            else torch.zeros(model.unet.latent_channels, 8, 8)
        )

        def denoiser(x, t, cond):
            y = cond if cond is not None else null
            cond_l = l if cond is not None else torch.zeros_like(l)
            return model.unet(x[None], cond_l[None], torch.tensor([t]), y[None])[0]

        gen = torch.Generator().manual_seed(seed)
        x_T = torch.randn(l.shape, generator=gen)
        z0 = pnm_sample(denoiser, x_T, ctx, guidance, model.schedule)
        tex = model.vae.decode((z0 / model.latent_scale)[None])[0]
    return tex.permute(1, 2, 0).numpy().astype(np.float64)


def gdm_sample(
    model: GeometryDiffusion,
    geo_prompt: str,
    guidance: GuidanceConfig = GDM_GUIDANCE,
    seed: int = 0,
) -> np.ndarray:
    """Generate one identity-coefficient vector from the geometry clauses."""
    model.net.eval()
    model.text_encoder.eval()
    d = len(model.alpha_mean)
    with torch.no_grad():
        if geo_prompt:
            ctx = model.text_encoder(
                torch.tensor(pad_tokens(tokenize(geo_prompt)), dtype=torch.long)
            )
        else:
            ctx = model.text_encoder.null_embedding()
        null = model.text_encoder.null_embedding()

        def denoiser(x, t, cond):
            y = cond if cond is not None else null
            return model.net(x[None], torch.tensor([t]), y[None])[0]

        gen = torch.Generator().manual_seed(seed)
        x_T = torch.randn(d, generator=gen)
        h0 = pnm_sample(denoiser, x_T, ctx, guidance, model.schedule)
    return h0.numpy().astype(np.float64) * model.alpha_std + model.alpha_mean
