"""Rasterization of trajectories into inflow frames, splitting, windowing."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .grid import locate_cell
from .types import GridSpec, InflowSeries, TrajectoryPoint, WindowedSample


def entry_events(
    trajectories: list[TrajectoryPoint], grid: GridSpec
) -> list[tuple[int, int]]:
    """(timestamp, cell) cell-entry events, one per transition into a cell.

    Points are grouped per (driver, order) and ordered by timestamp. An entry
    occurs whenever the current cell differs from the previous one; the first
    in-grid point of a record is an entry, and re-entering the grid after
    leaving it counts again. Points outside the grid emit nothing.
    """
    by_record: dict[tuple[str, str], list[TrajectoryPoint]] = {}
    for p in trajectories:
        by_record.setdefault((p.driver_id, p.order_id), []).append(p)

    events: list[tuple[int, int]] = []
    for record in by_record.values():
        record.sort(key=lambda p: p.timestamp)
        previous: int | None = None
        for p in record:
            cell = locate_cell(p.lat, p.lon, grid)
            if cell is not None and cell != previous:
                events.append((p.timestamp, cell))
            previous = cell
    return events


def aggregate_inflows(
    trajectories: list[TrajectoryPoint],
    grid: GridSpec,
    interval: int = 1800,
    time_range: tuple[int, int] | None = None,
) -> InflowSeries:
    """Count cell-entry events per (interval, cell) into an InflowSeries.

    Frames cover [min timestamp, max timestamp] rounded down/up to interval
    boundaries; pass ``time_range`` to force a specific coverage so that
    series from different trajectory subsets stay aligned.
    """
    if interval <= 0 or 86400 % interval != 0:
        raise ConfigError(f"interval must divide a day evenly, got {interval}")

    events = entry_events(trajectories, grid)
    if time_range is None:
        if not events:
            return InflowSeries(grid, interval, 0, np.zeros((0, grid.n_cells)))
        timestamps = [t for t, _ in events]
        time_range = (min(timestamps), max(timestamps))

    start = (time_range[0] // interval) * interval
    end = (time_range[1] // interval) * interval
    n_frames = (end - start) // interval + 1
    frames = np.zeros((n_frames, grid.n_cells), dtype=np.float32)
    for ts, cell in events:
        idx = (ts - start) // interval
        if 0 <= idx < n_frames:
            frames[idx, cell] += 1.0
    return InflowSeries(grid, interval, start, frames)


def split_series(series: InflowSeries, train_fraction: float) -> tuple[InflowSeries, InflowSeries]:
    """Contiguous prefix/suffix split at floor(T * fraction); no shuffling."""
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError(f"train fraction must be in (0, 1), got {train_fraction}")
    if series.n_frames < 2:
        raise ConfigError(f"cannot split a series with T={series.n_frames}")
    cut = int(series.n_frames * train_fraction)
    head = InflowSeries(series.grid, series.interval, series.start_time, series.frames[:cut].copy())
    tail = InflowSeries(
        series.grid,
        series.interval,
        series.start_time + cut * series.interval,
        series.frames[cut:].copy(),
    )
    return head, tail


def make_windows(series: InflowSeries, history: int = 12, horizon: int = 6) -> list[WindowedSample]:
    """Sliding supervised samples: inputs [i, i+h), target at i+h+tau-1.

    Produces max(0, T - h - tau + 1) samples; too-short series yield [].
    """
    if history < 1 or horizon < 1:
        raise ConfigError(f"history and horizon must be >= 1, got {history}, {horizon}")
    count = series.n_frames - history - horizon + 1
    samples = []
    for i in range(max(0, count)):
        target_index = i + history + horizon - 1
        samples.append(
            WindowedSample(
                inputs=series.frames[i : i + history].copy(),
                target=series.frames[target_index].copy(),
                target_timestamp=series.frame_timestamp(target_index),
            )
        )
    return samples
