"""Traffic-flow predictor zoo: GRU baseline, TAU, and the GAT+TAU composite."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..data.types import GridSpec
from ..errors import ConfigError
from .gat import GraphAttention
from .graph import AdjacencyGraph, build_adjacency
from .tau import TemporalAttentionUnit


@dataclass(frozen=True)
class GataUConfig:
    """Widths and kernels for the TAU-based predictors.

    ``head_features`` must equal ``conv_hidden``: the graph-attention output
    is fused with the input-conv features through a residual add.
    """

    conv_hidden: int = 16
    heads: int = 4
    head_features: int = 16
    tau_kernel: int = 5
    tau_dilated_kernel: int = 7
    tau_dilation: int = 3
    out_hidden: int = 16
    radius_km: float = 4.0

    def __post_init__(self):
        if self.heads < 1 or self.conv_hidden < 1 or self.out_hidden < 1:
            raise ConfigError("widths and head count must be >= 1")
        if self.head_features != self.conv_hidden:
            raise ConfigError("head_features must match conv_hidden for the residual fusion")


class _SpatialEncoder(nn.Module):
    """Two 3x3 convs lifting (B, h, H, W) history into feature maps."""

    def __init__(self, history: int, hidden: int):
        super().__init__()
        self.conv1 = nn.Conv2d(history, hidden, 3, padding=1)
        self.conv2 = nn.Conv2d(hidden, hidden, 3, padding=1)

    def forward(self, x):
        return torch.relu(self.conv2(torch.relu(self.conv1(x))))


class _OutputHead(nn.Module):
    """Two 1x1 convs then a dense layer down to one value per region."""

    def __init__(self, channels: int, hidden: int, n_cells: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, hidden, 1)
        self.conv2 = nn.Conv2d(hidden, hidden, 1)
        self.dense = nn.Linear(hidden * n_cells, n_cells)

    def forward(self, z):
        z = torch.relu(self.conv1(z))
        z = torch.relu(self.conv2(z))
        return self.dense(z.flatten(1))


class GATAUPredictor(nn.Module):
    """Spatial conv encoder -> multi-head graph attention with residual
    fusion -> temporal attention over the grid -> conv/dense head.

    Node features fed to the attention layer are the encoder channels at
    each cell (history is already folded into channels by the encoder);
    cells map to nodes in row-major order.
    """

    def __init__(self, grid: GridSpec, history: int, cfg: GataUConfig | None = None,
                 graph: AdjacencyGraph | None = None):
        super().__init__()
        self.cfg = cfg = cfg or GataUConfig()
        self.rows, self.cols = grid.rows, grid.cols
        if graph is None:
            graph = build_adjacency(grid, cfg.radius_km)
        self.encoder = _SpatialEncoder(history, cfg.conv_hidden)
        self.mgat = GraphAttention(graph, cfg.conv_hidden, cfg.head_features, cfg.heads)
        self.tau = TemporalAttentionUnit(
            cfg.conv_hidden, cfg.tau_kernel, cfg.tau_dilated_kernel, cfg.tau_dilation
        )
        self.head = _OutputHead(cfg.conv_hidden, cfg.out_hidden, grid.n_cells)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, h, n = x.shape
        feats = self.encoder(x.view(b, h, self.rows, self.cols))  # (B, C, H, W)
        nodes = feats.flatten(2).transpose(1, 2)  # (B, N, C), row-major cells
        fused = self.mgat(nodes) + nodes
        z = fused.transpose(1, 2).view(b, -1, self.rows, self.cols)
        return self.head(self.tau(z))


class TAUPredictor(nn.Module):
    """GATAU without the graph-attention branch."""

    def __init__(self, grid: GridSpec, history: int, cfg: GataUConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or GataUConfig()
        self.rows, self.cols = grid.rows, grid.cols
        self.encoder = _SpatialEncoder(history, cfg.conv_hidden)
        self.tau = TemporalAttentionUnit(
            cfg.conv_hidden, cfg.tau_kernel, cfg.tau_dilated_kernel, cfg.tau_dilation
        )
        self.head = _OutputHead(cfg.conv_hidden, cfg.out_hidden, grid.n_cells)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, h, n = x.shape
        feats = self.encoder(x.view(b, h, self.rows, self.cols))
        return self.head(self.tau(feats))


class GRUPredictor(nn.Module):
    """Stacked gated-recurrent baseline over the frame sequence."""

    def __init__(self, grid: GridSpec, history: int, hidden: int = 32, layers: int = 3):
        super().__init__()
        self.gru = nn.GRU(grid.n_cells, hidden, num_layers=layers, batch_first=True)
        self.head = nn.Linear(hidden, grid.n_cells)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.gru(x)
        return self.head(out[:, -1])


def prediction_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error in normalized flow space."""
    if pred.shape != target.shape:
        raise ConfigError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    return (pred - target).abs().mean()


def make_predictor(name: str, grid: GridSpec, history: int, options: dict | None = None) -> nn.Module:
    """Instantiate a zoo model by registry name ('gru', 'tau', 'gatau')."""
    options = dict(options or {})
    if name == "gru":
        return GRUPredictor(grid, history, **options)
    if name == "tau":
        cfg = GataUConfig(**options) if options else None
        return TAUPredictor(grid, history, cfg)
    if name == "gatau":
        graph = options.pop("graph", None)
        cfg = GataUConfig(**options) if options else None
        return GATAUPredictor(grid, history, cfg, graph=graph)
    raise ConfigError(f"unknown model {name!r}; expected one of gru, tau, gatau")


PREDICTOR_NAMES = ("gru", "tau", "gatau")
