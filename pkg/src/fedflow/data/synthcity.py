"""Seeded synthetic-city trajectory generator.

Stands in for proprietary ride-sharing corpora: drivers carry persistent
spatial preferences (a home anchor cell) so that partitioning by driver
induces measurable feature skew across client silos, and a two-peak daily
demand curve shapes the temporal profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..seeding import derive_rng
from .types import GridSpec, TrajectoryPoint


@dataclass(frozen=True)
class DemandPeak:
    hour: float
    weight: float
    width_hours: float = 1.25


@dataclass(frozen=True)
class SynthCityConfig:
    grid: GridSpec
    n_drivers: int
    n_days: int
    start_time: int = 1477958400  # 2016-11-01 00:00:00 UTC, a Tuesday
    orders_per_driver_per_day: float = 16.0
    points_per_order: tuple[int, int] = (5, 12)
    home_bias: float = 0.85
    home_spread_cells: float = 1.0
    demand_peaks: tuple[DemandPeak, ...] = (
        DemandPeak(hour=8.0, weight=1.0),
        DemandPeak(hour=18.0, weight=1.0),
    )
    gps_gap_seconds: int = 60
    anchor_cells: tuple[int, ...] | None = None  # pin per-driver anchors (tests)


def _sample_start_second(rng: np.random.Generator, peaks: tuple[DemandPeak, ...]) -> int:
    weights = np.array([p.weight for p in peaks], dtype=np.float64)
    pick = peaks[rng.choice(len(peaks), p=weights / weights.sum())]
    hour = rng.normal(pick.hour, pick.width_hours) % 24.0
    return int(hour * 3600.0)


def _cell_to_lonlat(grid: GridSpec, row_f: float, col_f: float) -> tuple[float, float]:
    lat0, lat1 = grid.lat_range
    lon0, lon1 = grid.lon_range
    lat = lat0 + (row_f / grid.rows) * (lat1 - lat0)
    lon = lon0 + (col_f / grid.cols) * (lon1 - lon0)
    return lon, lat


@dataclass
class _Driver:
    driver_id: str
    anchor_row: float
    anchor_col: float
    activity: float = 1.0


def synth_city_generate(config: SynthCityConfig, seed: int) -> list[TrajectoryPoint]:
    """Generate a deterministic trajectory corpus for the configured city."""
    if config.n_drivers < 1 or config.n_days < 1:
        raise ConfigError("synthetic city needs at least one driver and one day")
    if config.anchor_cells is not None and len(config.anchor_cells) != config.n_drivers:
        raise ConfigError("anchor_cells must list one cell per driver")

    grid = config.grid
    rng = derive_rng(seed, "synth-city")

    drivers: list[_Driver] = []
    for d in range(config.n_drivers):
        if config.anchor_cells is not None:
            row, col = divmod(config.anchor_cells[d], grid.cols)
            anchor = (row + 0.5, col + 0.5)
        else:
            anchor = (rng.uniform(0, grid.rows), rng.uniform(0, grid.cols))
        drivers.append(
            _Driver(
                driver_id=f"d{d:04d}",
                anchor_row=anchor[0],
                anchor_col=anchor[1],
                activity=float(np.exp(rng.normal(0.0, 0.25))),
            )
        )

    def biased_cell_coords(driver: _Driver, spread: float) -> tuple[float, float]:
        if rng.uniform() < config.home_bias:
            row = rng.normal(driver.anchor_row, spread)
            col = rng.normal(driver.anchor_col, spread)
        else:
            row = rng.uniform(0, grid.rows)
            col = rng.uniform(0, grid.cols)
        return (
            float(np.clip(row, 0.0, grid.rows - 1e-9)),
            float(np.clip(col, 0.0, grid.cols - 1e-9)),
        )

    points: list[TrajectoryPoint] = []
    for driver in drivers:
        order_serial = 0
        for day in range(config.n_days):
            day_start = config.start_time + day * 86400
            n_orders = int(rng.poisson(config.orders_per_driver_per_day * driver.activity))
            for _ in range(n_orders):
                start_ts = day_start + _sample_start_second(rng, config.demand_peaks)
                pickup = biased_cell_coords(driver, config.home_spread_cells)
                dropoff = biased_cell_coords(driver, 2.0 * config.home_spread_cells)
                lo, hi = config.points_per_order
                n_points = int(rng.integers(lo, hi + 1))
                order_id = f"{driver.driver_id}-o{order_serial:05d}"
                order_serial += 1
                for k in range(n_points):
                    frac = k / max(1, n_points - 1)
                    row_f = pickup[0] + frac * (dropoff[0] - pickup[0])
                    col_f = pickup[1] + frac * (dropoff[1] - pickup[1])
                    row_f = float(np.clip(row_f + rng.normal(0, 0.05), 0.0, grid.rows - 1e-9))
                    col_f = float(np.clip(col_f + rng.normal(0, 0.05), 0.0, grid.cols - 1e-9))
                    lon, lat = _cell_to_lonlat(grid, row_f, col_f)
                    points.append(
                        TrajectoryPoint(
                            driver_id=driver.driver_id,
                            order_id=order_id,
                            timestamp=start_ts + k * config.gps_gap_seconds,
                            lon=lon,
                            lat=lat,
                        )
                    )
    return points
