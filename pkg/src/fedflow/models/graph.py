"""Region adjacency from grid geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.grid import haversine_km
from ..data.types import GridSpec
from ..errors import ConfigError


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric region graph with self-loops, as a (2, E) edge index."""

    n_nodes: int
    edges: np.ndarray  # int64, edges[0]=source j, edges[1]=destination i

    def __post_init__(self):
        if self.edges.ndim != 2 or self.edges.shape[0] != 2:
            raise ConfigError("edge index must have shape (2, E)")

    @property
    def n_edges(self) -> int:
        return self.edges.shape[1]

    def neighbor_sets(self) -> list[set[int]]:
        out: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for j, i in zip(self.edges[0], self.edges[1]):
            out[int(i)].add(int(j))
        return out


def build_adjacency(grid: GridSpec, radius_km: float = 4.0) -> AdjacencyGraph:
    """Connect cells whose centroids lie within radius_km of each other.

    Self-loops are always present so every node has at least one neighbor.
    """
    if radius_km <= 0:
        raise ConfigError(f"radius must be positive, got {radius_km}")
    n = grid.n_cells
    centroids = [grid.cell_centroid(i) for i in range(n)]
    sources = []
    targets = []
    for i in range(n):
        for j in range(n):
            if i == j or haversine_km(*centroids[i], *centroids[j]) <= radius_km:
                sources.append(j)
                targets.append(i)
    return AdjacencyGraph(n_nodes=n, edges=np.array([sources, targets], dtype=np.int64))
