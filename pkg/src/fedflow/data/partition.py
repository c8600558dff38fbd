"""Driver-exclusive partitioning of a trajectory corpus into client silos."""

from __future__ import annotations

from ..errors import ConfigError
from ..seeding import derive_rng
from .inflow import aggregate_inflows
from .types import ClientPartition, GridSpec, TrajectoryPoint


def partition_by_driver(
    trajectories: list[TrajectoryPoint],
    n_clients: int,
    seed: int,
    grid: GridSpec,
    interval: int = 1800,
) -> list[ClientPartition]:
    """Deal drivers round-robin over a seeded shuffle; one silo per client.

    Every driver's full trajectory set lands on exactly one client, driver
    set sizes differ by at most one, and all client inflow series cover the
    global time range so they stay frame-aligned for pairwise comparison.
    """
    if n_clients < 1:
        raise ConfigError(f"client count must be >= 1, got {n_clients}")
    drivers = sorted({p.driver_id for p in trajectories})
    if len(drivers) < n_clients:
        raise ConfigError(f"{len(drivers)} drivers cannot fill {n_clients} clients")

    rng = derive_rng(seed, "driver-partition")
    order = rng.permutation(len(drivers))
    assignment = {drivers[j]: int(k % n_clients) for k, j in enumerate(order)}

    timestamps = [p.timestamp for p in trajectories]
    time_range = (min(timestamps), max(timestamps)) if timestamps else None

    partitions = []
    for client_id in range(n_clients):
        subset = [p for p in trajectories if assignment[p.driver_id] == client_id]
        partitions.append(
            ClientPartition(
                client_id=client_id,
                driver_ids=frozenset(d for d, c in assignment.items() if c == client_id),
                trajectories=subset,
                inflow=aggregate_inflows(subset, grid, interval, time_range=time_range),
                order_count=len({(p.driver_id, p.order_id) for p in subset}),
            )
        )
    return partitions
