"""Shared test oracles, independent of the implementation paths they check."""

from __future__ import annotations

import numpy as np


def optimal_gaussian_denoiser(mu: float, sigma2: float, sched):
    """Closed-form optimal noise predictor for data x0 ~ N(mu, sigma2 * I).

    With x_t = sqrt(abar) x0 + sqrt(1-abar) eps and jointly Gaussian (x0, x_t),
    E[x0 | x_t] = (sqrt(abar) sigma2 x_t + (1-abar) mu) / (abar sigma2 + 1-abar)
    and the optimal eps estimate follows from inverting the forward map.
    """

    def denoiser(x_t, t, cond=None):
        abar = sched.alpha_bar(t)
        s = np.sqrt(abar)
        x0_hat = (s * sigma2 * x_t + (1.0 - abar) * mu) / (abar * sigma2 + 1.0 - abar)
        return (x_t - s * x0_hat) / np.sqrt(1.0 - abar)

    return denoiser


def brute_force_cumprod(betas: np.ndarray) -> np.ndarray:
    """Cumulative product of (1 - beta) in extended precision."""
    out = np.empty(len(betas), dtype=np.longdouble)
    acc = np.longdouble(1.0)
    for i, b in enumerate(betas):
        acc = acc * (np.longdouble(1.0) - np.longdouble(b))
        out[i] = acc
    return out
