"""Cell location and geodesic helpers."""

from __future__ import annotations

import math

from .types import GridSpec

EARTH_RADIUS_KM = 6371.0088


def locate_cell(lat: float, lon: float, grid: GridSpec) -> int | None:
    """Row-major index of the cell containing (lat, lon), or None if outside.

    Cells are half-open [edge_i, edge_{i+1}) on both axes; the topmost and
    rightmost edges are inclusive so the grid partitions the closed bbox.
    """
    lat0, lat1 = grid.lat_range
    lon0, lon1 = grid.lon_range
    if not (lat0 <= lat <= lat1 and lon0 <= lon <= lon1):
        return None
    row = int((lat - lat0) / (lat1 - lat0) * grid.rows)
    col = int((lon - lon0) / (lon1 - lon0) * grid.cols)
    row = min(row, grid.rows - 1)
    col = min(col, grid.cols - 1)
    return row * grid.cols + col


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in kilometres."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(a))
