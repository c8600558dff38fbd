"""Trajectory ingestion, rasterization, partitioning, and synthesis."""

from .grid import haversine_km, locate_cell
from .inflow import aggregate_inflows, entry_events, make_windows, split_series
from .io import export_inflow_csv, read_inflow, write_inflow, write_trajectory_csv
from .parse import ParseResult, parse_trajectories
from .partition import partition_by_driver
from .synthcity import DemandPeak, SynthCityConfig, synth_city_generate
from .types import ClientPartition, GridSpec, InflowSeries, TrajectoryPoint, WindowedSample

__all__ = [
    "ClientPartition",
    "DemandPeak",
    "GridSpec",
    "InflowSeries",
    "ParseResult",
    "SynthCityConfig",
    "TrajectoryPoint",
    "WindowedSample",
    "aggregate_inflows",
    "entry_events",
    "export_inflow_csv",
    "haversine_km",
    "locate_cell",
    "make_windows",
    "parse_trajectories",
    "partition_by_driver",
    "read_inflow",
    "split_series",
    "synth_city_generate",
    "write_inflow",
    "write_trajectory_csv",
]
