"""Noise-prediction training objective."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import NumericError
from .conditioning import Conditioning
from .denoiser import FlowDenoiser, conditioning_tensors
from .schedule import DiffusionSchedule


def diffusion_loss_terms(
    module: FlowDenoiser,
    x0: torch.Tensor,
    f: torch.Tensor,
    noise: torch.Tensor,
    cond: dict[str, torch.Tensor],
    schedule: DiffusionSchedule,
) -> torch.Tensor:
    """Squared noise-prediction error for fixed draws (f, noise).

    Mean over batch and coordinates of (noise - eps_hat(x_f, f, cond))^2,
    with x_f the closed-form corruption of x0. Deterministic given inputs,
    hence usable for gradient verification.
    """
    a_bar = torch.from_numpy(schedule.alpha_bars).to(x0.dtype)[f - 1]
    x_f = torch.sqrt(a_bar)[:, None] * x0 + torch.sqrt(1.0 - a_bar)[:, None] * noise
    eps_hat = module(x_f, f, cond)
    if not torch.isfinite(eps_hat).all():
        raise NumericError("denoiser produced non-finite noise prediction", context="denoiser")
    return ((noise - eps_hat) ** 2).mean()


def diffusion_loss(
    module: FlowDenoiser,
    x0_model: np.ndarray,
    conds: list[Conditioning],
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
    flow_scale: float,
) -> torch.Tensor:
    """Training loss for one batch: draws f ~ Uniform{1..F} and standard
    normal noise from ``rng``, then evaluates the fixed-draw objective.

    ``x0_model`` is the batch already mapped to model space, shape (B, N).
    """
    batch = np.asarray(x0_model)
    dtype = next(module.parameters()).dtype
    f = rng.integers(1, schedule.n_steps + 1, size=batch.shape[0])
    noise = rng.standard_normal(batch.shape)
    cond = conditioning_tensors(conds, module.n_cells, flow_scale, dtype)
    return diffusion_loss_terms(
        module,
        torch.from_numpy(batch).to(dtype),
        torch.from_numpy(f).long(),
        torch.from_numpy(noise).to(dtype),
        cond,
        schedule,
    )
