"""Conditioning records for the flow generator.

Each generated or training frame is conditioned on its interval of day, day
of week, maximum cell flow, and the index of the cell attaining it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..data.types import InflowSeries
from ..errors import ConfigError

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class Conditioning:
    interval_of_day: int
    day_of_week: int  # Monday = 0
    max_flow: float
    argmax_region: int

    def validate(self, intervals_per_day: int, n_cells: int) -> "Conditioning":
        if not (0 <= self.interval_of_day < intervals_per_day):
            raise ConfigError(f"interval index {self.interval_of_day} out of range")
        if not (0 <= self.day_of_week < 7):
            raise ConfigError(f"day-of-week index {self.day_of_week} out of range")
        if not (0 <= self.argmax_region < n_cells):
            raise ConfigError(f"argmax region {self.argmax_region} out of range")
        if self.max_flow < 0:
            raise ConfigError("max flow must be non-negative")
        return self


def build_conditioning(
    timestamp: int,
    frame: np.ndarray,
    interval: int = 1800,
    utc_offset: int = 0,
) -> Conditioning:
    """Conditioning record for one frame at one UTC timestamp.

    The interval index counts from local midnight (``utc_offset`` seconds
    east of UTC); day of week follows the proleptic Gregorian calendar with
    Monday as 0. Argmax ties break toward the lowest cell index.
    """
    frame = np.asarray(frame)
    local = timestamp + utc_offset
    interval_of_day = int((local % SECONDS_PER_DAY) // interval)
    day_of_week = datetime.fromtimestamp(local, tz=timezone.utc).weekday()
    return Conditioning(
        interval_of_day=interval_of_day,
        day_of_week=day_of_week,
        max_flow=float(frame.max()) if frame.size else 0.0,
        argmax_region=int(frame.argmax()) if frame.size else 0,
    )


def series_conditioning(series: InflowSeries, utc_offset: int = 0) -> list[Conditioning]:
    return [
        build_conditioning(series.frame_timestamp(t), series.frames[t], series.interval, utc_offset)
        for t in range(series.n_frames)
    ]


@dataclass(frozen=True)
class ConditioningTable:
    """Typical conditioning per (day-of-week, interval-of-day) slot.

    Built from per-client summaries only (no raw frames cross silos): each
    client reports, per slot, its mean frame maximum and modal argmax cell;
    the server pools means weighted by slot counts and takes the plurality
    argmax.
    """

    intervals_per_day: int
    max_flow: np.ndarray  # (7, intervals_per_day)
    argmax_region: np.ndarray  # (7, intervals_per_day) int

    def lookup(self, timestamp: int, interval: int, utc_offset: int = 0) -> Conditioning:
        local = timestamp + utc_offset
        idx = int((local % SECONDS_PER_DAY) // interval)
        dow = datetime.fromtimestamp(local, tz=timezone.utc).weekday()
        return Conditioning(
            interval_of_day=idx,
            day_of_week=dow,
            max_flow=float(self.max_flow[dow, idx]),
            argmax_region=int(self.argmax_region[dow, idx]),
        )


@dataclass(frozen=True)
class ClientConditioningSummary:
    """One client's per-slot statistics, the only stage-1 metadata shared."""

    counts: np.ndarray  # (7, I) frames seen per slot
    max_flow_sum: np.ndarray  # (7, I) sum of frame maxima
    argmax_votes: np.ndarray  # (7, I, N) votes per argmax cell


def summarize_client(series: InflowSeries, utc_offset: int = 0) -> ClientConditioningSummary:
    intervals_per_day = SECONDS_PER_DAY // series.interval
    n = series.grid.n_cells
    counts = np.zeros((7, intervals_per_day))
    max_flow_sum = np.zeros((7, intervals_per_day))
    votes = np.zeros((7, intervals_per_day, n))
    for cond in series_conditioning(series, utc_offset):
        counts[cond.day_of_week, cond.interval_of_day] += 1
        max_flow_sum[cond.day_of_week, cond.interval_of_day] += cond.max_flow
        votes[cond.day_of_week, cond.interval_of_day, cond.argmax_region] += 1
    return ClientConditioningSummary(counts, max_flow_sum, votes)


def pool_summaries(summaries: list[ClientConditioningSummary], intervals_per_day: int) -> ConditioningTable:
    if not summaries:
        raise ConfigError("need at least one client summary")
    counts = sum(s.counts for s in summaries)
    flow_sum = sum(s.max_flow_sum for s in summaries)
    votes = sum(s.argmax_votes for s in summaries)
    filled = counts > 0
    if not filled.any():
        raise ConfigError("client summaries cover no (day, interval) slot")
    mean_flow = np.zeros_like(flow_sum)
    mean_flow[filled] = flow_sum[filled] / counts[filled]
    global_mean = float(mean_flow[filled].mean())
    # Unseen slots borrow the same interval on other days, then the global mean.
    interval_counts = counts.sum(0)
    interval_votes = votes.sum(0)
    argmax = np.zeros((7, intervals_per_day), dtype=np.int64)
    for dow in range(7):
        for idx in range(intervals_per_day):
            if filled[dow, idx]:
                argmax[dow, idx] = int(votes[dow, idx].argmax())
            elif interval_counts[idx] > 0:
                mean_flow[dow, idx] = flow_sum.sum(0)[idx] / interval_counts[idx]
                argmax[dow, idx] = int(interval_votes[idx].argmax())
            else:
                mean_flow[dow, idx] = global_mean
    return ConditioningTable(intervals_per_day, mean_flow, argmax)


CONDITIONING_COLUMNS = ("timestamp", "interval", "day", "max_flow", "argmax_region")


def write_conditioning_manifest(path: str | Path, timestamps: list[int], conds: list[Conditioning]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONDITIONING_COLUMNS)
        for ts, cond in zip(timestamps, conds):
            writer.writerow([ts, cond.interval_of_day, cond.day_of_week, f"{cond.max_flow:g}", cond.argmax_region])


def read_conditioning_manifest(path: str | Path) -> tuple[list[int], list[Conditioning]]:
    timestamps = []
    conds = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            timestamps.append(int(row["timestamp"]))
            conds.append(
                Conditioning(
                    interval_of_day=int(row["interval"]),
                    day_of_week=int(row["day"]),
                    max_flow=float(row["max_flow"]),
                    argmax_region=int(row["argmax_region"]),
                )
            )
    return timestamps, conds
