"""Reverse denoising chain and its torch-module adapter."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ConfigError, NumericError
from .conditioning import Conditioning
from .denoiser import FlowDenoiser, conditioning_tensors
from .schedule import DiffusionSchedule, FlowScaler


def _draw_noise(rng, n_frames: int, n_cells: int) -> np.ndarray:
    if isinstance(rng, (list, tuple)):
        return np.stack([r.standard_normal(n_cells) for r in rng])
    return rng.standard_normal((n_frames, n_cells))


def reverse_from(
    denoise_fn,
    x: np.ndarray,
    f_start: int,
    conds: list[Conditioning],
    schedule: DiffusionSchedule,
    rng=None,
    deterministic: bool = False,
) -> np.ndarray:
    """Run the learned reverse chain from step ``f_start`` down to 0.

    Each step applies mu = (x - beta_f / sqrt(1 - a_bar_f) * eps_hat) / sqrt(alpha_f),
    adding sqrt(beta_f) * z noise for every step but the last; ``deterministic``
    (or rng=None) suppresses the noise term entirely. Returns model-space x0.
    """
    x = np.asarray(x, dtype=np.float64)
    if not (1 <= f_start <= schedule.n_steps):
        raise ConfigError(f"start step {f_start} outside 1..{schedule.n_steps}")
    for f in range(f_start, 0, -1):
        eps_hat = np.asarray(denoise_fn(x, f, conds), dtype=np.float64)
        if eps_hat.shape != x.shape:
            raise NumericError(f"denoiser returned shape {eps_hat.shape}", context="denoiser")
        beta = schedule.beta(f)
        alpha = schedule.alpha(f)
        a_bar = schedule.alpha_bar(f)
        x = (x - beta / np.sqrt(1.0 - a_bar) * eps_hat) / np.sqrt(alpha)
        if f > 1 and not deterministic and rng is not None:
            x = x + np.sqrt(beta) * _draw_noise(rng, x.shape[0], x.shape[1])
    return x


def reverse_sample(
    denoise_fn,
    conds: list[Conditioning],
    schedule: DiffusionSchedule,
    rng,
    scaler: FlowScaler,
    n_cells: int,
) -> np.ndarray:
    """Sample flow frames: start from standard normal latents, denoise, map
    back to flow units, and clamp at zero. Returns (len(conds), N) flows."""
    latents = _draw_noise(rng, len(conds), n_cells)
    x0 = reverse_from(denoise_fn, latents, schedule.n_steps, conds, schedule, rng=rng)
    return scaler.to_flows(x0)


def module_denoise_fn(module: FlowDenoiser, flow_scale: float):
    """Adapt a torch denoiser to the numpy callable the sampler consumes."""
    module.eval()
    dtype = next(module.parameters()).dtype

    def denoise(x: np.ndarray, f: int, conds: list[Conditioning]) -> np.ndarray:
        with torch.no_grad():
            xt = torch.from_numpy(np.ascontiguousarray(x)).to(dtype)
            ft = torch.full((x.shape[0],), f, dtype=torch.long)
            cond = conditioning_tensors(conds, module.n_cells, flow_scale, dtype)
            out = module(xt, ft, cond)
        return out.cpu().double().numpy()

    return denoise
