"""Core data types: trajectories, grids, inflow series, windows, partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class TrajectoryPoint:
    """One GPS fix of one vehicle on one order."""

    driver_id: str
    order_id: str
    timestamp: int  # UTC seconds
    lon: float
    lat: float


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid of rows x cols cells over a lat/lon bounding box."""

    lat_range: tuple[float, float]
    lon_range: tuple[float, float]
    rows: int = 10
    cols: int = 10

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"grid must have positive dimensions, got {self.rows}x{self.cols}")
        if not (self.lat_range[0] < self.lat_range[1]) or not (self.lon_range[0] < self.lon_range[1]):
            raise ConfigError(f"degenerate bounding box: lat={self.lat_range}, lon={self.lon_range}")
        for v in (*self.lat_range, *self.lon_range):
            if not math.isfinite(v):
                raise ConfigError("bounding box coordinates must be finite")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell_centroid(self, index: int) -> tuple[float, float]:
        """(lat, lon) of a cell's center, row-major indexing."""
        row, col = divmod(index, self.cols)
        dlat = (self.lat_range[1] - self.lat_range[0]) / self.rows
        dlon = (self.lon_range[1] - self.lon_range[0]) / self.cols
        return (
            self.lat_range[0] + (row + 0.5) * dlat,
            self.lon_range[0] + (col + 0.5) * dlon,
        )


@dataclass
class InflowSeries:
    """Time-ordered frames of per-cell entry counts.

    ``frames`` has shape (T, N) with N = rows*cols, row-major cell order.
    Frame t covers [start_time + t*interval, start_time + (t+1)*interval).
    """

    grid: GridSpec
    interval: int  # seconds
    start_time: int  # UTC seconds, aligned to an interval boundary
    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.grid.n_cells:
            raise ConfigError(
                f"frames must be (T, {self.grid.n_cells}), got {self.frames.shape}"
            )
        if self.frames.size and float(self.frames.min()) < 0:
            raise ConfigError("inflow counts must be non-negative")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def frame_timestamp(self, t: int) -> int:
        return self.start_time + t * self.interval


@dataclass(frozen=True)
class WindowedSample:
    """Supervised sample: h history frames and one target frame at offset tau."""

    inputs: np.ndarray  # (h, N)
    target: np.ndarray  # (N,)
    target_timestamp: int


@dataclass
class ClientPartition:
    """One client's silo: its drivers, their trajectories, derived inflow."""

    client_id: int
    driver_ids: frozenset[str]
    trajectories: list[TrajectoryPoint] = field(repr=False)
    inflow: InflowSeries
    order_count: int
