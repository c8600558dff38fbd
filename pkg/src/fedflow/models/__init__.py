"""Prediction model zoo and graph utilities."""

from .gat import GraphAttention, edge_softmax, gat_layer
from .graph import AdjacencyGraph, build_adjacency
from .tau import TemporalAttentionUnit
from .zoo import (
    GATAUPredictor,
    GRUPredictor,
    GataUConfig,
    PREDICTOR_NAMES,
    TAUPredictor,
    make_predictor,
    prediction_loss,
)

__all__ = [
    "AdjacencyGraph",
    "GATAUPredictor",
    "GRUPredictor",
    "GataUConfig",
    "GraphAttention",
    "PREDICTOR_NAMES",
    "TAUPredictor",
    "TemporalAttentionUnit",
    "build_adjacency",
    "edge_softmax",
    "gat_layer",
    "make_predictor",
    "prediction_loss",
]
