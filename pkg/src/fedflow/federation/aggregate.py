"""Parameter aggregation mechanisms for the synchronous round loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ProtocolError
from ..numerics import AdamState, ParamVector, adam_step


@dataclass(frozen=True)
class ClientUpdate:
    """One client's contribution to a round: new params and sample weight."""

    client_id: int
    params: ParamVector
    weight: float
    local_losses: tuple[float, ...] = ()


def fedavg_aggregate(updates: list[ClientUpdate]) -> ParamVector:
    """Sample-weighted coordinate-wise mean of client parameters.

    Updates are accumulated in float64 in client-id order, which makes the
    result exactly invariant to permutations of the input list; the weighted
    mean of a single update (or of identical updates) reproduces the client
    parameters bitwise after the round-trip cast.
    """
    if not updates:
        raise ProtocolError("cannot aggregate an empty update set")
    reference = updates[0].params
    for update in updates:
        if update.weight <= 0:
            raise ProtocolError(f"client {update.client_id} has non-positive weight")
        if not update.params.same_layout(reference) or update.params.dtype != reference.dtype:
            raise ProtocolError(f"client {update.client_id} update does not match the global layout")

    ordered = sorted(updates, key=lambda u: u.client_id)
    total = float(np.float64(sum(float(u.weight) for u in ordered)))
    acc = np.zeros(reference.size, dtype=np.float64)
    for update in ordered:
        acc += (float(update.weight) / total) * update.params.values.astype(np.float64)
    return reference.with_values(acc.astype(reference.dtype))


@dataclass(frozen=True)
class FedOptConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.99


def fedopt_pseudo_gradient(global_params: ParamVector, updates: list[ClientUpdate]) -> ParamVector:
    """Server pseudo-gradient: global minus the weighted client mean."""
    mean = fedavg_aggregate(updates)
    delta = global_params.values.astype(np.float64) - mean.values.astype(np.float64)
    return global_params.with_values(delta.astype(global_params.dtype))


def fedopt_server_step(
    state: AdamState, global_params: ParamVector, pseudo_grad: ParamVector
) -> tuple[ParamVector, AdamState]:
    """Adaptive server update of the global model along the pseudo-gradient."""
    return adam_step(state, global_params, pseudo_grad)


def fedprox_penalty(local: ParamVector, global_params: ParamVector, mu: float) -> float:
    """(mu / 2) * ||local - global||^2, the proximal term added per local step."""
    if local.size != global_params.size:
        raise ProtocolError("proximal penalty requires matching parameter shapes")
    if mu < 0:
        raise ProtocolError(f"proximal coefficient must be >= 0, got {mu}")
    diff = local.values.astype(np.float64) - global_params.values.astype(np.float64)
    return float(0.5 * mu * np.dot(diff, diff))


@dataclass
class ServerState:
    """Mutable server-side view of one federated run."""

    params: ParamVector
    method: str
    round_index: int = 0
    adam: AdamState | None = None
    round_losses: list[float] = field(default_factory=list)
