"""Conditional noise-prediction network over the region axis.

A 1-D UNet: stacked residual conv blocks (kernel 3) per encoder/decoder
level with skip connections, an attentive mid block (kernel-1 projections),
sinusoidal step embedding, and a wide & deep conditioning embedding — the
wide path is a linear map over the interval x day crossed one-hot (an
embedding lookup), the deep path a small dense stack over all four
conditioning fields. Embeddings are summed into every residual block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..errors import ConfigError
from .conditioning import Conditioning


@dataclass(frozen=True)
class DenoiserConfig:
    widths: tuple[int, ...] = (32, 64)
    blocks_per_level: int = 2
    mid_attention: bool = True
    emb_dim: int = 32
    deep_hidden: int = 32
    intervals_per_day: int = 48

    def __post_init__(self):
        if not self.widths or any(w < 1 for w in self.widths):
            raise ConfigError("denoiser needs at least one level of positive width")

    def validate_length(self, n_cells: int) -> None:
        down_factor = 2 ** (len(self.widths) - 1)
        if n_cells % down_factor != 0:
            raise ConfigError(
                f"{n_cells} regions not divisible by the downsampling factor {down_factor}"
            )


def sinusoidal_embedding(steps: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=steps.dtype, device=steps.device) / max(half - 1, 1)
    )
    args = steps[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = torch.nn.functional.pad(emb, (0, 1))
    return emb


class ResBlock1d(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, emb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(1, in_ch)
        self.conv1 = nn.Conv1d(in_ch, out_ch, 3, padding=1)
        self.emb_proj = nn.Linear(emb_dim, out_ch)
        self.norm2 = nn.GroupNorm(1, out_ch)
        self.conv2 = nn.Conv1d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv1d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x, emb):
        h = self.conv1(torch.nn.functional.silu(self.norm1(x)))
        h = h + self.emb_proj(emb)[:, :, None]
        h = self.conv2(torch.nn.functional.silu(self.norm2(h)))
        return h + self.skip(x)


class SelfAttention1d(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.norm = nn.GroupNorm(1, channels)
        self.query = nn.Conv1d(channels, channels, 1)
        self.key = nn.Conv1d(channels, channels, 1)
        self.value = nn.Conv1d(channels, channels, 1)
        self.proj = nn.Conv1d(channels, channels, 1)
        self.scale = channels**-0.5

    def forward(self, x):
        h = self.norm(x)
        q, k, v = self.query(h), self.key(h), self.value(h)
        attn = torch.softmax(torch.einsum("bcl,bcm->blm", q, k) * self.scale, dim=-1)
        out = torch.einsum("blm,bcm->bcl", attn, v)
        return x + self.proj(out)


class FlowDenoiser(nn.Module):
    """Predict the injected noise for a corrupted frame batch.

    forward(x, f, cond) with x (B, N) in model space, f (B,) 1-indexed step
    numbers, and cond the tensor dict from ``conditioning_tensors``.
    """

    def __init__(self, n_cells: int, cfg: DenoiserConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or DenoiserConfig()
        cfg.validate_length(n_cells)
        self.n_cells = n_cells
        emb = cfg.emb_dim

        self.time_mlp = nn.Sequential(nn.Linear(emb, emb), nn.SiLU(), nn.Linear(emb, emb))
        self.wide = nn.Embedding(7 * cfg.intervals_per_day, emb)
        self.deep = nn.Sequential(
            nn.Linear(4, cfg.deep_hidden), nn.SiLU(), nn.Linear(cfg.deep_hidden, emb)
        )

        widths = cfg.widths
        self.in_conv = nn.Conv1d(1, widths[0], 3, padding=1)
        self.enc_levels = nn.ModuleList()
        self.downs = nn.ModuleList()
        for i, w in enumerate(widths):
            blocks = nn.ModuleList(ResBlock1d(w, w, emb) for _ in range(cfg.blocks_per_level))
            self.enc_levels.append(blocks)
            if i + 1 < len(widths):
                self.downs.append(nn.Conv1d(w, widths[i + 1], 3, stride=2, padding=1))

        deepest = widths[-1]
        self.mid_block1 = ResBlock1d(deepest, deepest, emb)
        self.mid_attn = SelfAttention1d(deepest) if cfg.mid_attention else None
        self.mid_block2 = ResBlock1d(deepest, deepest, emb)

        self.ups = nn.ModuleList()
        self.dec_levels = nn.ModuleList()
        for i in range(len(widths) - 2, -1, -1):
            self.ups.append(nn.ConvTranspose1d(widths[i + 1], widths[i], 4, stride=2, padding=1))
            blocks = nn.ModuleList()
            for b in range(cfg.blocks_per_level):
                in_ch = 2 * widths[i] if b == 0 else widths[i]
                blocks.append(ResBlock1d(in_ch, widths[i], emb))
            self.dec_levels.append(blocks)

        self.out_norm = nn.GroupNorm(1, widths[0])
        self.out_conv = nn.Conv1d(widths[0], 1, 3, padding=1)
        self.out_conv.zero_init = True  # noise prediction starts at zero
        nn.init.zeros_(self.out_conv.weight)
        nn.init.zeros_(self.out_conv.bias)

    def embed(self, f: torch.Tensor, cond: dict[str, torch.Tensor]) -> torch.Tensor:
        dtype = self.in_conv.weight.dtype
        time_emb = self.time_mlp(sinusoidal_embedding(f.to(dtype), self.cfg.emb_dim))
        wide_idx = cond["day"] * self.cfg.intervals_per_day + cond["interval"]
        deep_in = torch.stack(
            [
                cond["interval"].to(dtype) / self.cfg.intervals_per_day,
                cond["day"].to(dtype) / 7.0,
                cond["max_flow"].to(dtype),
                cond["argmax"].to(dtype),
            ],
            dim=-1,
        )
        return time_emb + self.wide(wide_idx) + self.deep(deep_in)

    def forward(self, x: torch.Tensor, f: torch.Tensor, cond: dict[str, torch.Tensor]) -> torch.Tensor:
        if x.dim() != 2 or x.shape[1] != self.n_cells:
            raise ConfigError(f"expected (B, {self.n_cells}) input, got {tuple(x.shape)}")
        emb = self.embed(f, cond)
        h = self.in_conv(x[:, None, :])

        skips = []
        for i, blocks in enumerate(self.enc_levels):
            for block in blocks:
                h = block(h, emb)
            if i + 1 < len(self.enc_levels):
                skips.append(h)
                h = self.downs[i](h)

        h = self.mid_block1(h, emb)
        if self.mid_attn is not None:
            h = self.mid_attn(h)
        h = self.mid_block2(h, emb)

        for up, blocks in zip(self.ups, self.dec_levels):
            h = up(h)
            h = torch.cat([h, skips.pop()], dim=1)
            for block in blocks:
                h = block(h, emb)

        h = torch.nn.functional.silu(self.out_norm(h))
        return self.out_conv(h)[:, 0, :]


def conditioning_tensors(
    conds: list[Conditioning],
    n_cells: int,
    flow_scale: float,
    dtype: torch.dtype = torch.float32,
) -> dict[str, torch.Tensor]:
    """Pack conditioning records into model inputs; magnitudes are scaled by
    the dataset flow range so every field lands in a unit-ish interval."""
    scale = max(flow_scale, 1e-9)
    return {
        "interval": torch.tensor([c.interval_of_day for c in conds], dtype=torch.long),
        "day": torch.tensor([c.day_of_week for c in conds], dtype=torch.long),
        "max_flow": torch.tensor([c.max_flow / scale for c in conds], dtype=dtype),
        "argmax": torch.tensor([c.argmax_region / n_cells for c in conds], dtype=dtype),
    }
