"""Trajectory CSV ingestion."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from ..errors import DataFormatError
from .types import TrajectoryPoint

COLUMNS = ("driver_id", "order_id", "timestamp", "lon", "lat")


@dataclass
class ParseResult:
    points: list[TrajectoryPoint]
    skipped: int


def _row_to_point(row: list[str]) -> TrajectoryPoint | None:
    if len(row) != 5:
        return None
    driver, order, ts, lon, lat = (f.strip() for f in row)
    if not driver or not order:
        return None
    try:
        timestamp = int(float(ts))
        lon_v = float(lon)
        lat_v = float(lat)
    except ValueError:
        return None
    if not (math.isfinite(lon_v) and math.isfinite(lat_v)):
        return None
    return TrajectoryPoint(driver, order, timestamp, lon_v, lat_v)


def parse_trajectories(stream, delimiter: str = ",") -> ParseResult:
    """Parse delimiter-separated trajectory records from a text or byte stream.

    Expected columns: driver_id, order_id, timestamp, lon, lat. A header row
    is detected (non-numeric timestamp field) and skipped without counting as
    malformed. Malformed rows are counted and dropped; row order is preserved.

    Raises DataFormatError when more than half of the data rows are malformed,
    and OSError/UnicodeDecodeError propagate for unreadable streams.
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    raw = stream.read()
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    else:
        text = raw

    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    rows = [r for r in reader if r and any(f.strip() for f in r)]
    if rows and rows[0] and _row_to_point(rows[0]) is None:
        header = [f.strip().lower() for f in rows[0]]
        if header == list(COLUMNS):
            rows = rows[1:]

    points: list[TrajectoryPoint] = []
    skipped = 0
    for row in rows:
        point = _row_to_point(row)
        if point is None:
            skipped += 1
        else:
            points.append(point)

    total = len(points) + skipped
    if total and skipped * 2 > total:
        raise DataFormatError(
            f"{skipped}/{total} rows malformed; stream does not look like trajectory data"
        )
    return ParseResult(points, skipped)
