"""Noise schedules, forward diffusion, guidance combination, and reverse samplers.

All operations are array-library agnostic: they combine inputs with python-float
coefficients, so the same code paths serve numpy arrays (oracles, tests) and
torch tensors (trained denoisers).  Samplers are pure functions of their inputs
and an explicit noise stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ModelError, ParameterError

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Linear-beta forward process tables.

    ``betas[i]`` and ``alphas_cumprod[i]`` correspond to timestep ``t = i + 1``
    (timesteps are 1-indexed, ``t in {1..T}``).
    """

    num_steps: int
    betas: np.ndarray
    alphas_cumprod: np.ndarray

    def alpha_bar(self, t: int) -> float:
        """Cumulative product alpha-bar at timestep t; alpha_bar(0) == 1."""
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alphas_cumprod[t - 1])

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.num_steps:
            raise ParameterError(f"timestep {t} outside [1, {self.num_steps}]")


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance scale and sampler step count used at inference."""

    scale: float
    sampler_steps: int


def build_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear beta schedule with running-product alpha-bar table."""
    if T < 2:
        raise ParameterError(f"T must be >= 2, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ParameterError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas_cumprod = np.cumprod(1.0 - betas)
    return NoiseSchedule(num_steps=T, betas=betas, alphas_cumprod=alphas_cumprod)


def add_noise(x0, eps, t: int, sched: NoiseSchedule):
    """Forward process: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    if getattr(x0, "shape", None) != getattr(eps, "shape", None):
        raise ParameterError(f"shape mismatch: {x0.shape} vs {eps.shape}")
    abar = sched.alpha_bar(t)
    return float(np.sqrt(abar)) * x0 + float(np.sqrt(1.0 - abar)) * eps


def cfg_combine(eps_cond, eps_uncond, w: float):
    """Classifier-free guidance: w * eps_cond + (1 - w) * eps_uncond."""
    if getattr(eps_cond, "shape", None) != getattr(eps_uncond, "shape", None):
        raise ParameterError(
            f"shape mismatch: {eps_cond.shape} vs {eps_uncond.shape}"
        )
    if w == 1.0:
        return eps_cond
    if w == 0.0:
        return eps_uncond
    return w * eps_cond + (1.0 - w) * eps_uncond


def ddpm_step(x_t, eps_hat, t: int, sched: NoiseSchedule, noise):
    """One ancestral reverse step x_t -> x_{t-1} with beta-tilde posterior variance.

    ``noise`` must be all-zero at t == 1 (deterministic final step).
    """
    sched._check_t(t)
    if x_t.shape != eps_hat.shape or x_t.shape != noise.shape:
        raise ParameterError("x_t, eps_hat, noise must share a shape")
    beta = sched.beta(t)
    alpha = 1.0 - beta
    abar = sched.alpha_bar(t)
    abar_prev = sched.alpha_bar(t - 1)
    mean = (x_t - (beta / np.sqrt(1.0 - abar)) * eps_hat) / np.sqrt(alpha)
    if t == 1:
        if float((noise * noise).sum()) != 0.0:
            raise ParameterError("noise must be zero at the final step (t=1)")
        return mean
    var = (1.0 - abar_prev) / (1.0 - abar) * beta
    return mean + float(np.sqrt(var)) * noise


def sample_timestep_grid(T: int, steps: int) -> np.ndarray:
    """Evenly spaced, strictly decreasing integer grid from T down to 1."""
    if not 1 <= steps <= T:
        raise ParameterError(f"steps must be in [1, T], got {steps}")
    grid = np.round(np.linspace(T, 1, steps)).astype(np.int64)
    if np.any(np.diff(grid) >= 0):
        raise ParameterError(f"degenerate timestep grid for T={T}, steps={steps}")
    return grid


def _transfer(x, e, abar_t: float, abar_prev: float):
    """Pseudo-numerical transfer from abar_t to abar_prev given noise estimate e."""
    coef_x = float(np.sqrt(abar_prev / abar_t))
    denom = float(
        np.sqrt(abar_t)
        * (np.sqrt((1.0 - abar_prev) * abar_t) + np.sqrt((1.0 - abar_t) * abar_prev))
    )
    coef_e = (abar_prev - abar_t) / denom
    return coef_x * x - coef_e * e


def pnm_sample(
    denoiser: Callable,
    x_T,
    cond,
    g: GuidanceConfig,
    sched: NoiseSchedule,
) -> "type(x_T)":
    """Pseudo linear multistep sampling with Runge-Kutta warmup.

    ``denoiser(x, t, cond)`` predicts noise; it is called with ``cond`` and with
    ``cond=None`` (the null condition) and the two estimates are merged by
    :func:`cfg_combine` at scale ``g.scale``.  The first three grid steps use a
    4-evaluation Runge-Kutta scheme to build up the history required by the
    4th-order linear-multistep update.
    """
    if g.sampler_steps < 5:
        raise ParameterError("pnm sampling requires at least 5 steps (warmup history)")
    grid = sample_timestep_grid(sched.num_steps, g.sampler_steps)

    def guided(x, t: int):
        e_c = denoiser(x, t, cond)
        e_u = denoiser(x, t, None)
        if e_c.shape != x.shape or e_u.shape != x.shape:
            raise ModelError(
                f"denoiser output shape {e_c.shape} != input shape {x.shape}"
            )
        return cfg_combine(e_c, e_u, g.scale)

    x = x_T
    history: list = []
    for i in range(len(grid)):
        t = int(grid[i])
        t_prev = int(grid[i + 1]) if i + 1 < len(grid) else 0
        abar_t = sched.alpha_bar(t)
        abar_prev = sched.alpha_bar(t_prev)
        if len(history) < 3:
            # Runge-Kutta warmup step (4 denoiser calls via a midpoint).
            t_mid = (t + t_prev + 1) // 2
            abar_mid = sched.alpha_bar(t_mid)
            e1 = guided(x, t)
            x1 = _transfer(x, e1, abar_t, abar_mid)
            e2 = guided(x1, t_mid)
            x2 = _transfer(x, e2, abar_t, abar_mid)
            e3 = guided(x2, t_mid)
            x3 = _transfer(x, e3, abar_t, abar_prev)
            e4 = guided(x3, max(t_prev, 1))
            e_prime = (e1 + 2.0 * e2 + 2.0 * e3 + e4) / 6.0
            history.append(e1)
        else:
            e_t = guided(x, t)
            history.append(e_t)
            if len(history) > 4:
                history.pop(0)
            e_prime = (
                55.0 * history[-1]
                - 59.0 * history[-2]
                + 37.0 * history[-3]
                - 9.0 * history[-4]
            ) / 24.0
        x = _transfer(x, e_prime, abar_t, abar_prev)
    return x


def ddpm_sample(
    denoiser: Callable,
    x_T,
    cond,
    sched: NoiseSchedule,
    noise_stream: Sequence,
    guidance_scale: float = 1.0,
) -> "type(x_T)":
    """Full ancestral chain from t=T down to t=1.

    ``noise_stream[k]`` supplies the injected noise for timestep ``t = T - k``;
    the entry for t=1 must be zero.  Guidance follows the same two-call
    convention as :func:`pnm_sample`.
    """
    T = sched.num_steps
    if len(noise_stream) != T:
        raise ParameterError(f"noise_stream must have {T} entries")
    x = x_T
    for k, t in enumerate(range(T, 0, -1)):
        e_c = denoiser(x, t, cond)
        if guidance_scale != 1.0:
            e_u = denoiser(x, t, None)
            e = cfg_combine(e_c, e_u, guidance_scale)
        else:
            e = e_c
        x = ddpm_step(x, e, t, sched, noise_stream[k])
    return x
