"""Multi-head graph attention over the region graph.

Edge scores use a single linear form over the concatenated transformed
endpoint features with LeakyReLU (slope 0.2); scores are normalized with a
per-destination softmax over incoming edges, and head outputs pass through
ELU and are averaged. The layer is edge-list based (gather/scatter); tests
compare it against a dense N x N oracle.
"""

from __future__ import annotations

import torch
from torch import nn

from .graph import AdjacencyGraph

LEAKY_SLOPE = 0.2


def edge_softmax(scores: torch.Tensor, targets: torch.Tensor, n_nodes: int) -> torch.Tensor:
    """Softmax of edge scores grouped by destination node.

    ``scores`` is (..., E); grouping runs over the trailing edge axis.
    """
    shape = scores.shape[:-1] + (n_nodes,)
    max_per_node = scores.new_full(shape, -torch.inf)
    idx = targets.expand(scores.shape)
    max_per_node = max_per_node.scatter_reduce(-1, idx, scores, reduce="amax", include_self=True)
    shifted = torch.exp(scores - max_per_node.gather(-1, idx))
    denom = torch.zeros(shape, dtype=scores.dtype, device=scores.device)
    denom = denom.scatter_add(-1, idx, shifted)
    return shifted / denom.gather(-1, idx)


class GraphAttention(nn.Module):
    """One multi-head GAT layer: (B, N, F) node features -> (B, N, F_out)."""

    def __init__(self, graph: AdjacencyGraph, in_features: int, out_features: int, heads: int = 4):
        super().__init__()
        self.n_nodes = graph.n_nodes
        self.heads = heads
        self.out_features = out_features
        self.weight = nn.Parameter(torch.empty(heads, out_features, in_features))
        self.attn_src = nn.Parameter(torch.empty(heads, out_features))
        self.attn_dst = nn.Parameter(torch.empty(heads, out_features))
        self.register_buffer("edge_src", torch.from_numpy(graph.edges[0]).long(), persistent=False)
        self.register_buffer("edge_dst", torch.from_numpy(graph.edges[1]).long(), persistent=False)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        # transformed features per head: (B, K, N, F')
        hw = torch.einsum("bnf,kof->bkno", h, self.weight)
        src_term = (hw * self.attn_src[None, :, None, :]).sum(-1)  # (B, K, N)
        dst_term = (hw * self.attn_dst[None, :, None, :]).sum(-1)
        scores = src_term[..., self.edge_src] + dst_term[..., self.edge_dst]  # (B, K, E)
        scores = torch.nn.functional.leaky_relu(scores, LEAKY_SLOPE)
        alpha = edge_softmax(scores, self.edge_dst, self.n_nodes)  # (B, K, E)

        messages = hw[..., self.edge_src, :] * alpha.unsqueeze(-1)  # (B, K, E, F')
        out = torch.zeros_like(hw)
        index = self.edge_dst[None, None, :, None].expand(messages.shape)
        out = out.scatter_add(2, index, messages)
        out = torch.nn.functional.elu(out)
        return out.mean(dim=1)  # average heads -> (B, N, F')


def gat_layer(
    h: torch.Tensor,
    graph: AdjacencyGraph,
    weight: torch.Tensor,
    attn: torch.Tensor,
) -> torch.Tensor:
    """Functional single-call surface: (N, F) or (B, N, F) features.

    ``weight`` is (K, F', F); ``attn`` is (K, 2F'): the half pairing with the
    destination node's features followed by the half pairing with the source.
    """
    layer = GraphAttention.__new__(GraphAttention)
    nn.Module.__init__(layer)
    layer.n_nodes = graph.n_nodes
    layer.heads = weight.shape[0]
    layer.out_features = weight.shape[1]
    layer.weight = nn.Parameter(weight, requires_grad=False)
    layer.attn_dst = nn.Parameter(attn[:, : weight.shape[1]], requires_grad=False)
    layer.attn_src = nn.Parameter(attn[:, weight.shape[1] :], requires_grad=False)
    layer.register_buffer("edge_src", torch.from_numpy(graph.edges[0]).long(), persistent=False)
    layer.register_buffer("edge_dst", torch.from_numpy(graph.edges[1]).long(), persistent=False)
    squeeze = h.dim() == 2
    out = layer(h.unsqueeze(0) if squeeze else h)
    return out.squeeze(0) if squeeze else out
