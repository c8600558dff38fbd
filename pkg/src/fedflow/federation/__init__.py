"""Cross-silo federated orchestration."""

from .aggregate import (
    ClientUpdate,
    FedOptConfig,
    ServerState,
    fedavg_aggregate,
    fedopt_pseudo_gradient,
    fedopt_server_step,
    fedprox_penalty,
)
from .comm import COMM_COST_REFERENCE_MB, CommCostLedger, CommRow, comm_cost
from .training import (
    FL_METHODS,
    ClientSilo,
    DiffusionDataset,
    DiffusionTask,
    FederatedRunResult,
    NonFLResult,
    PredictionDataset,
    PredictionTask,
    RoundLogEntry,
    dataset_from_windows,
    run_federated_training,
    run_nonfl_baseline,
    train_centralized,
)

__all__ = [
    "COMM_COST_REFERENCE_MB",
    "ClientSilo",
    "ClientUpdate",
    "CommCostLedger",
    "CommRow",
    "DiffusionDataset",
    "DiffusionTask",
    "FL_METHODS",
    "FedOptConfig",
    "FederatedRunResult",
    "NonFLResult",
    "PredictionDataset",
    "PredictionTask",
    "RoundLogEntry",
    "ServerState",
    "comm_cost",
    "dataset_from_windows",
    "fedavg_aggregate",
    "fedopt_pseudo_gradient",
    "fedopt_server_step",
    "fedprox_penalty",
    "run_federated_training",
    "run_nonfl_baseline",
    "train_centralized",
]
