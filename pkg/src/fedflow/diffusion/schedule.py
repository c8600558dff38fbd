"""Noise schedule, closed-form forward corruption, and flow normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step noise tables, 1-indexed via step f in {1..F}."""

    betas: np.ndarray  # (F,)
    alphas: np.ndarray  # 1 - beta
    alpha_bars: np.ndarray  # cumulative product of alphas

    @property
    def n_steps(self) -> int:
        return self.betas.shape[0]

    def beta(self, f: int) -> float:
        return float(self.betas[f - 1])

    def alpha(self, f: int) -> float:
        return float(self.alphas[f - 1])

    def alpha_bar(self, f: int) -> float:
        return float(self.alpha_bars[f - 1])


def make_schedule(n_steps: int, beta_min: float = 1e-4, beta_max: float = 0.02) -> DiffusionSchedule:
    """Linear beta schedule with precomputed alpha and alpha-bar tables."""
    if n_steps < 1:
        raise ConfigError(f"need at least one diffusion step, got {n_steps}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ConfigError(f"betas must satisfy 0 < min <= max < 1, got ({beta_min}, {beta_max})")
    if n_steps == 1:
        betas = np.array([beta_min], dtype=np.float64)
    else:
        betas = np.linspace(beta_min, beta_max, n_steps, dtype=np.float64)
    alphas = 1.0 - betas
    return DiffusionSchedule(betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


def forward_sample(x0: np.ndarray, f: int, noise: np.ndarray, schedule: DiffusionSchedule) -> np.ndarray:
    """Closed-form corrupted sample sqrt(a_bar_f) x0 + sqrt(1 - a_bar_f) noise."""
    if not (1 <= f <= schedule.n_steps):
        raise ConfigError(f"step {f} outside 1..{schedule.n_steps}")
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x0.shape != noise.shape:
        raise ConfigError(f"noise shape {noise.shape} does not match sample shape {x0.shape}")
    a_bar = schedule.alpha_bar(f)
    return np.sqrt(a_bar) * x0 + np.sqrt(1.0 - a_bar) * noise


@dataclass(frozen=True)
class FlowScaler:
    """Min-max map between flow units and the model's [-1, 1] space."""

    low: float
    high: float

    def __post_init__(self):
        if not (self.high > self.low):
            raise ConfigError(f"degenerate flow range [{self.low}, {self.high}]")

    @classmethod
    def fit(cls, frames: np.ndarray) -> "FlowScaler":
        frames = np.asarray(frames)
        low = float(frames.min())
        high = float(frames.max())
        if high == low:
            high = low + 1.0
        return cls(low, high)

    def to_model(self, flows: np.ndarray) -> np.ndarray:
        return 2.0 * (np.asarray(flows, dtype=np.float64) - self.low) / (self.high - self.low) - 1.0

    def to_flows(self, model_values: np.ndarray) -> np.ndarray:
        flows = (np.asarray(model_values, dtype=np.float64) + 1.0) / 2.0 * (self.high - self.low) + self.low
        return np.maximum(flows, 0.0)
