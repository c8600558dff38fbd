"""Temporal attention unit: statical x dynamical attention over a feature map."""

from __future__ import annotations

import torch
from torch import nn


class TemporalAttentionUnit(nn.Module):
    """Shape-preserving attention over (B, C, H, W) feature maps.

    The statical path is depth-wise conv -> dilated depth-wise conv -> 1x1
    conv; the dynamical path is global average pooling -> dense -> sigmoid,
    giving per-channel weights. Output = statical(z) * dynamical(z) * z.
    """

    def __init__(self, channels: int, kernel: int = 5, dilated_kernel: int = 7, dilation: int = 3):
        super().__init__()
        self.depthwise = nn.Conv2d(channels, channels, kernel, padding=kernel // 2, groups=channels)
        dilated_pad = dilation * (dilated_kernel // 2)
        self.depthwise_dilated = nn.Conv2d(
            channels, channels, dilated_kernel, padding=dilated_pad, groups=channels, dilation=dilation
        )
        self.pointwise = nn.Conv2d(channels, channels, 1)
        self.channel_gate = nn.Linear(channels, channels)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        statical = self.pointwise(self.depthwise_dilated(self.depthwise(z)))
        pooled = z.mean(dim=(2, 3))
        dynamical = torch.sigmoid(self.channel_gate(pooled))[:, :, None, None]
        return statical * dynamical * z
