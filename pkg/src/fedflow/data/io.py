"""File formats: portable inflow series ("TFLW"), CSV exports, trajectory CSV.

TFLW layout (all little-endian):

    magic   4s   b"TFLW"
    version u16  currently 1
    rows    u16
    cols    u16
    lat_min f64, lat_max f64, lon_min f64, lon_max f64
    interval   u32  seconds
    start_time i64  UTC seconds
    n_frames   u32
    frames     n_frames * rows * cols * f32
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..errors import DataFormatError
from .types import GridSpec, InflowSeries, TrajectoryPoint

TFLW_MAGIC = b"TFLW"
TFLW_VERSION = 1
_HEADER = struct.Struct("<4sHHHddddIqI")


def write_inflow(series: InflowSeries, path: str | Path) -> None:
    grid = series.grid
    header = _HEADER.pack(
        TFLW_MAGIC,
        TFLW_VERSION,
        grid.rows,
        grid.cols,
        grid.lat_range[0],
        grid.lat_range[1],
        grid.lon_range[0],
        grid.lon_range[1],
        series.interval,
        series.start_time,
        series.n_frames,
    )
    payload = np.ascontiguousarray(series.frames, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def read_inflow(path: str | Path) -> InflowSeries:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated inflow file")
    (magic, version, rows, cols, lat0, lat1, lon0, lon1, interval, start, n_frames) = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != TFLW_MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != TFLW_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    expected = n_frames * rows * cols * 4
    body = raw[_HEADER.size :]
    if len(body) != expected:
        raise DataFormatError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    frames = np.frombuffer(body, dtype="<f4").reshape(n_frames, rows * cols).copy()
    grid = GridSpec(lat_range=(lat0, lat1), lon_range=(lon0, lon1), rows=rows, cols=cols)
    return InflowSeries(grid, interval, start, frames)


def export_inflow_csv(series: InflowSeries, path: str | Path) -> None:
    """One row per interval: timestamp then N cell counts."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + [f"cell_{i}" for i in range(series.grid.n_cells)])
        for t in range(series.n_frames):
            writer.writerow([series.frame_timestamp(t)] + [f"{v:g}" for v in series.frames[t]])


def write_trajectory_csv(points: list[TrajectoryPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["driver_id", "order_id", "timestamp", "lon", "lat"])
        for p in points:
            writer.writerow([p.driver_id, p.order_id, p.timestamp, f"{p.lon:.7f}", f"{p.lat:.7f}"])
