"""Client datasets, local training, and the synchronous federated round loop.

Clients are stateless between rounds: each round re-creates the model and
its Adam optimizer from the broadcast parameters, runs ``local_rounds``
full passes over the silo's training set, and returns new parameters. Every
stochastic choice (batch order, diffusion step/noise draws) comes from a
stream derived from (seed, round, client tag), so a one-client federated
run walks exactly the same arithmetic as centralized training.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import torch

from ..data.types import WindowedSample
from ..diffusion.conditioning import Conditioning
from ..diffusion.loss import diffusion_loss
from ..diffusion.schedule import DiffusionSchedule, FlowScaler
from ..errors import ConfigError, ProtocolError
from ..metrics import EvalReport, mape, nmae, nrmse
from ..numerics import AdamState, ParamVector
from ..seeding import client_round_rng
from .aggregate import (
    ClientUpdate,
    FedOptConfig,
    fedavg_aggregate,
    fedopt_pseudo_gradient,
    fedopt_server_step,
)
from .comm import CommCostLedger

FL_METHODS = ("fedavg", "fedopt", "fedprox")

REAL, SYNTHETIC = 0, 1


@dataclass
class PredictionDataset:
    """Supervised windows in flow units plus the silo's z-score stats."""

    inputs: np.ndarray  # (S, h, N) float32
    targets: np.ndarray  # (S, N) float32
    mean: float
    std: float
    provenance: np.ndarray  # (S,) uint8, REAL or SYNTHETIC

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean) / self.std

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return values * self.std + self.mean


def dataset_from_windows(
    samples: list[WindowedSample],
    stats_windows: list[WindowedSample] | None = None,
    provenance: np.ndarray | None = None,
) -> PredictionDataset:
    """Pack windows into arrays; z-stats come from ``stats_windows`` (the
    silo's real training windows) so augmentation cannot shift them."""
    if not samples:
        raise ConfigError("cannot build a dataset from zero windows")
    inputs = np.stack([s.inputs for s in samples]).astype(np.float32)
    targets = np.stack([s.target for s in samples]).astype(np.float32)
    basis = stats_windows if stats_windows is not None else samples
    pool = np.concatenate([np.stack([s.inputs for s in basis]).ravel(),
                           np.stack([s.target for s in basis]).ravel()])
    std = float(pool.std())
    if provenance is None:
        provenance = np.zeros(len(samples), dtype=np.uint8)
    return PredictionDataset(
        inputs=inputs,
        targets=targets,
        mean=float(pool.mean()),
        std=std if std > 0 else 1.0,
        provenance=np.asarray(provenance, dtype=np.uint8),
    )


@dataclass
class DiffusionDataset:
    """Per-frame training set for the flow generator."""

    frames: np.ndarray  # (S, N) float32, flow units
    conds: list[Conditioning]

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class PredictionTask:
    """Trains a zoo predictor on z-scored windows with MAE loss."""

    model_factory: object  # () -> nn.Module (float32, seeded elsewhere)
    lr: float = 1e-3
    batch_size: int = 32

    def local_fit(
        self,
        params: ParamVector,
        dataset: PredictionDataset,
        epochs: int,
        rng: np.random.Generator,
        prox_mu: float = 0.0,
        prox_anchor: ParamVector | None = None,
    ) -> tuple[ParamVector, list[float]]:
        module = self.model_factory()
        params.load_into(module)
        module.train()
        optimizer = torch.optim.Adam(module.parameters(), lr=self.lr)
        anchors = _prox_anchors(module, prox_anchor) if prox_mu > 0 else None
        x_all = torch.from_numpy(dataset.normalize(dataset.inputs))
        y_all = torch.from_numpy(dataset.normalize(dataset.targets))
        losses = []
        for _ in range(epochs):
            order = rng.permutation(len(dataset))
            for lo in range(0, len(dataset), self.batch_size):
                idx = torch.from_numpy(order[lo : lo + self.batch_size].copy())
                pred = module(x_all[idx])
                loss = (pred - y_all[idx]).abs().mean()
                if anchors is not None:
                    loss = loss + 0.5 * prox_mu * _prox_term(module, anchors)
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
        return ParamVector.from_module(module), losses

    def evaluate(self, params: ParamVector, datasets: list[PredictionDataset]) -> EvalReport:
        """Pooled flow-unit metrics of one model over several silos' windows."""
        module = self.model_factory()
        params.load_into(module)
        module.eval()
        preds, truths = [], []
        with torch.no_grad():
            for dataset in datasets:
                x = torch.from_numpy(dataset.normalize(dataset.inputs))
                for lo in range(0, len(dataset), 256):
                    out = module(x[lo : lo + 256]).numpy()
                    preds.append(dataset.denormalize(out))
                truths.append(dataset.targets)
        pred = np.concatenate(preds)
        truth = np.concatenate(truths).astype(np.float64)
        return EvalReport(nmae=nmae(pred, truth), mape=mape(pred, truth), nrmse=nrmse(pred, truth))


@dataclass(frozen=True)
class DiffusionTask:
    """Trains the conditional denoiser on a silo's inflow frames."""

    model_factory: object
    schedule: DiffusionSchedule
    scaler: FlowScaler
    lr: float = 1e-4
    batch_size: int = 32

    def local_fit(
        self,
        params: ParamVector,
        dataset: DiffusionDataset,
        epochs: int,
        rng: np.random.Generator,
        prox_mu: float = 0.0,
        prox_anchor: ParamVector | None = None,
    ) -> tuple[ParamVector, list[float]]:
        module = self.model_factory()
        params.load_into(module)
        module.train()
        optimizer = torch.optim.Adam(module.parameters(), lr=self.lr)
        anchors = _prox_anchors(module, prox_anchor) if prox_mu > 0 else None
        x0_model = self.scaler.to_model(dataset.frames)
        losses = []
        for _ in range(epochs):
            order = rng.permutation(len(dataset))
            for lo in range(0, len(dataset), self.batch_size):
                idx = order[lo : lo + self.batch_size]
                conds = [dataset.conds[i] for i in idx]
                loss = diffusion_loss(
                    module, x0_model[idx], conds, self.schedule, rng, flow_scale=self.scaler.high
                )
                if anchors is not None:
                    loss = loss + 0.5 * prox_mu * _prox_term(module, anchors)
                optimizer.zero_grad(set_to_none=True)
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
        return ParamVector.from_module(module), losses

    def evaluate(self, params: ParamVector, datasets) -> None:
        return None  # generation quality is assessed by the pipeline, not per round


def _prox_anchors(module, anchor: ParamVector) -> dict[str, torch.Tensor]:
    if anchor is None:
        raise ProtocolError("proximal training requires the broadcast global parameters")
    return {
        name: torch.from_numpy(anchor.segment_values(name).copy())
        for name, _ in module.named_parameters()
    }


def _prox_term(module, anchors: dict[str, torch.Tensor]) -> torch.Tensor:
    return sum(((p - anchors[name]) ** 2).sum() for name, p in module.named_parameters())


@dataclass
class ClientSilo:
    """One client's training data; ``rng_tag`` defaults to the client id and
    exists so degenerate-equivalence tests can give twin clients twin streams."""

    client_id: int
    dataset: PredictionDataset | DiffusionDataset
    rng_tag: int | None = None

    @property
    def tag(self) -> int:
        return self.client_id if self.rng_tag is None else self.rng_tag

    @property
    def weight(self) -> float:
        return float(len(self.dataset))


@dataclass(frozen=True)
class RoundLogEntry:
    round_index: int
    client_id: int
    local_loss: float
    eval_nmae: float | None
    eval_mape: float | None
    bytes_up: int
    bytes_down: int


@dataclass
class FederatedRunResult:
    params: ParamVector
    logs: list[RoundLogEntry]
    ledger: CommCostLedger
    eval_history: list[tuple[int, EvalReport]] = field(default_factory=list)


def _client_pass(task, silo, params, epochs, seed, round_index, method, prox_mu, global_params):
    rng = client_round_rng(seed, round_index, silo.tag)
    mu = prox_mu if method == "fedprox" else 0.0
    try:
        new_params, losses = task.local_fit(
            params.copy(), silo.dataset, epochs, rng, prox_mu=mu, prox_anchor=global_params
        )
    except Exception as err:
        raise ProtocolError(
            f"client {silo.client_id} failed in round {round_index}: {err}"
        ) from err
    return ClientUpdate(silo.client_id, new_params, silo.weight, tuple(losses))


def run_federated_training(
    task,
    silos: list[ClientSilo],
    method: str,
    rounds: int,
    local_rounds: int,
    seed: int,
    initial_params: ParamVector,
    *,
    fedopt: FedOptConfig = FedOptConfig(),
    prox_mu: float = 0.001,
    eval_datasets: list | None = None,
    eval_every: int = 1,
    workers: int = 1,
) -> FederatedRunResult:
    """Synchronous cross-silo training with full participation every round.

    Per round: broadcast the global parameters, run ``local_rounds`` local
    epochs on every client in parallel, aggregate by the chosen method, and
    log losses, pooled evaluation metrics, and exchanged bytes. Client
    failure aborts the run. Deterministic given (config, seed); thread-level
    parallelism does not change results because client streams are private
    and aggregation orders updates by client id.
    """
    if method not in FL_METHODS:
        raise ConfigError(f"unknown FL method {method!r}; expected one of {FL_METHODS}")
    if rounds < 1 or local_rounds < 1:
        raise ConfigError("round budgets must be >= 1")
    if len({s.client_id for s in silos}) != len(silos) or not silos:
        raise ConfigError("silos must be non-empty with unique client ids")

    global_params = initial_params.copy()
    adam = AdamState.create(global_params, lr=fedopt.lr, beta1=fedopt.beta1, beta2=fedopt.beta2)
    ledger = CommCostLedger()
    logs: list[RoundLogEntry] = []
    eval_history: list[tuple[int, EvalReport]] = []
    payload = global_params.nbytes

    for round_index in range(rounds):
        ledger.record_round(round_index, [s.client_id for s in silos], payload)

        def one(silo):
            return _client_pass(
                task, silo, global_params, local_rounds, seed, round_index, method, prox_mu,
                global_params,
            )

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                updates = list(pool.map(one, silos))
        else:
            updates = [one(silo) for silo in silos]

        if method == "fedopt":
            pseudo = fedopt_pseudo_gradient(global_params, updates)
            global_params, adam = fedopt_server_step(adam, global_params, pseudo)
        else:
            global_params = fedavg_aggregate(updates)

        report = None
        if eval_datasets is not None and (round_index % eval_every == 0 or round_index == rounds - 1):
            report = task.evaluate(global_params, eval_datasets)
            if report is not None:
                eval_history.append((round_index, report))
        for update in updates:
            logs.append(
                RoundLogEntry(
                    round_index=round_index,
                    client_id=update.client_id,
                    local_loss=update.local_losses[-1] if update.local_losses else float("nan"),
                    eval_nmae=report.nmae if report else None,
                    eval_mape=report.mape if report else None,
                    bytes_up=payload,
                    bytes_down=payload,
                )
            )
    return FederatedRunResult(global_params, logs, ledger, eval_history)


def train_centralized(
    task,
    dataset,
    rounds: int,
    local_rounds: int,
    seed: int,
    initial_params: ParamVector,
    rng_tag: int = 0,
) -> tuple[ParamVector, list[float]]:
    """Round-structured training on one dataset; the exact arithmetic a
    single federated client with the same tag would perform."""
    params = initial_params.copy()
    losses: list[float] = []
    for round_index in range(rounds):
        rng = client_round_rng(seed, round_index, rng_tag)
        params, round_losses = task.local_fit(params, dataset, local_rounds, rng)
        losses.extend(round_losses)
    return params, losses


@dataclass
class NonFLResult:
    client_params: dict[int, ParamVector]
    client_reports: dict[int, EvalReport]
    best_client: int
    best_report: EvalReport


def run_nonfl_baseline(
    task,
    silos: list[ClientSilo],
    rounds: int,
    local_rounds: int,
    seed: int,
    initial_params: ParamVector,
    eval_datasets_by_client: dict[int, list],
) -> NonFLResult:
    """Independent per-silo training under the same budgets; the best test
    score across clients is the recorded baseline."""
    client_params: dict[int, ParamVector] = {}
    client_reports: dict[int, EvalReport] = {}
    for silo in silos:
        params, _ = train_centralized(
            task, silo.dataset, rounds, local_rounds, seed, initial_params, rng_tag=silo.tag
        )
        client_params[silo.client_id] = params
        client_reports[silo.client_id] = task.evaluate(params, eval_datasets_by_client[silo.client_id])
    best_client = min(client_reports, key=lambda c: client_reports[c].nmae)
    return NonFLResult(client_params, client_reports, best_client, client_reports[best_client])
