"""Fidelity and accuracy metrics for heterogeneity, generation, and prediction.

All similarity metrics normalize by ground-truth (or pooled) means so they
are invariant to joint rescaling. SSIM uses a single full-frame window: the
regional grids are small (10x10 by default) so sliding windows add nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data.types import ClientPartition
from .errors import ConfigError, UndefinedMetricError

# Per-client-count similarity of the driver partitions measured on the
# proprietary Didi Chuxing corpora (documentation reference only, never
# asserted against the synthetic city): client count -> (nMAD, SSI, TC).
DIDI_HETEROGENEITY_REFERENCE = {
    "chengdu": {
        2: (0.1017, 0.966, 0.932),
        4: (0.1434, 0.936, 0.884),
        6: (0.1754, 0.908, 0.846),
        8: (0.2022, 0.883, 0.812),
    },
    "xian": {
        2: (0.1283, 0.916, 0.936),
        4: (0.1808, 0.851, 0.888),
        6: (0.2215, 0.799, 0.846),
        8: (0.2553, 0.757, 0.809),
    },
}


def _as_frames(x) -> np.ndarray:
    frames = x.frames if hasattr(x, "frames") else x
    return np.asarray(frames, dtype=np.float64)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ConfigError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise UndefinedMetricError("empty inputs")


def nmae(pred, truth) -> float:
    """mean(|pred - truth|) / mean(truth)."""
    p, t = _as_frames(pred), _as_frames(truth)
    _check_shapes(p, t)
    denom = float(t.mean())
    if denom <= 0:
        raise UndefinedMetricError("nMAE undefined: ground truth mean is zero")
    return float(np.abs(p - t).mean() / denom)


def mape(pred, truth, mask_threshold: float = 1.0) -> float:
    """Percent error averaged over entries with truth >= mask_threshold."""
    p, t = _as_frames(pred), _as_frames(truth)
    _check_shapes(p, t)
    mask = t >= mask_threshold
    if not mask.any():
        raise UndefinedMetricError("MAPE undefined: every entry fell below the mask threshold")
    return float(100.0 * (np.abs(p[mask] - t[mask]) / t[mask]).mean())


def nrmse(pred, truth) -> float:
    """sqrt(mean((pred - truth)^2)) / mean(truth)."""
    p, t = _as_frames(pred), _as_frames(truth)
    _check_shapes(p, t)
    denom = float(t.mean())
    if denom <= 0:
        raise UndefinedMetricError("nRMSE undefined: ground truth mean is zero")
    return float(np.sqrt(np.mean((p - t) ** 2)) / denom)


def nmad(a, b) -> float:
    """mean(|a - b|) normalized by the mean of the pooled values."""
    x, y = _as_frames(a), _as_frames(b)
    _check_shapes(x, y)
    pooled = float((x.sum() + y.sum()) / (x.size + y.size))
    if pooled <= 0:
        raise UndefinedMetricError("nMAD undefined: pooled mean is zero")
    return float(np.abs(x - y).mean() / pooled)


def ssi(a, b) -> float:
    """Structural similarity averaged over frames, full-frame window.

    C1 = (0.01 L)^2 and C2 = (0.03 L)^2 with L the pooled value range of
    both sequences. A zero range means both sequences are one constant, in
    which case similarity is 1 by convention.
    """
    x, y = _as_frames(a), _as_frames(b)
    _check_shapes(x, y)
    pooled_range = float(max(x.max(), y.max()) - min(x.min(), y.min()))
    if pooled_range == 0.0:
        if not np.array_equal(x, y):
            raise UndefinedMetricError("SSI undefined: zero value range with unequal inputs")
        return 1.0
    c1 = (0.01 * pooled_range) ** 2
    c2 = (0.03 * pooled_range) ** 2
    mx = x.mean(axis=1)
    my = y.mean(axis=1)
    vx = x.var(axis=1)
    vy = y.var(axis=1)
    cov = ((x - mx[:, None]) * (y - my[:, None])).mean(axis=1)
    per_frame = ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
    return float(per_frame.mean())


def temporal_correlation(a, b) -> float:
    """Per-region Pearson correlation over time, averaged over regions with
    nonzero variance in both inputs."""
    x, y = _as_frames(a), _as_frames(b)
    _check_shapes(x, y)
    if x.shape[0] < 3:
        raise ConfigError(f"temporal correlation needs T >= 3, got T={x.shape[0]}")
    sx = x.std(axis=0)
    sy = y.std(axis=0)
    valid = (sx > 0) & (sy > 0)
    if not valid.any():
        raise UndefinedMetricError("TC undefined: no region varies in both inputs")
    xc = x[:, valid] - x[:, valid].mean(axis=0)
    yc = y[:, valid] - y[:, valid].mean(axis=0)
    r = (xc * yc).mean(axis=0) / (sx[valid] * sy[valid])
    return float(r.mean())


@dataclass(frozen=True)
class PairwiseSimilarity:
    client_a: int
    client_b: int
    nmad: float
    ssi: float
    tc: float


@dataclass(frozen=True)
class HeterogeneityReport:
    client_count: int
    nmad: float
    ssi: float
    tc: float
    pairs: tuple[PairwiseSimilarity, ...]

    def rows(self) -> list[dict]:
        out = [
            {
                "clients": self.client_count,
                "pair": f"{p.client_a}-{p.client_b}",
                "nmad": p.nmad,
                "ssi": p.ssi,
                "tc": p.tc,
            }
            for p in self.pairs
        ]
        out.append(
            {"clients": self.client_count, "pair": "mean", "nmad": self.nmad, "ssi": self.ssi, "tc": self.tc}
        )
        return out


def heterogeneity_report(partitions: list[ClientPartition]) -> HeterogeneityReport:
    """Average pairwise nMAD/SSI/TC over all unordered client pairs."""
    if len(partitions) < 2:
        raise ConfigError("heterogeneity report needs at least two partitions")
    shapes = {p.inflow.frames.shape for p in partitions}
    starts = {p.inflow.start_time for p in partitions}
    if len(shapes) != 1 or len(starts) != 1:
        raise ConfigError("client inflow series must be frame-aligned")

    pairs = []
    for pa, pb in combinations(partitions, 2):
        pairs.append(
            PairwiseSimilarity(
                client_a=pa.client_id,
                client_b=pb.client_id,
                nmad=nmad(pa.inflow, pb.inflow),
                ssi=ssi(pa.inflow, pb.inflow),
                tc=temporal_correlation(pa.inflow, pb.inflow),
            )
        )
    return HeterogeneityReport(
        client_count=len(partitions),
        nmad=float(np.mean([p.nmad for p in pairs])),
        ssi=float(np.mean([p.ssi for p in pairs])),
        tc=float(np.mean([p.tc for p in pairs])),
        pairs=tuple(pairs),
    )


@dataclass(frozen=True)
class EvalReport:
    """Prediction or generation quality against a ground-truth series."""

    nmae: float
    mape: float
    nrmse: float | None = None
    nmad: float | None = None
    ssi: float | None = None
    tc: float | None = None

    def rows(self, run_id: str) -> list[tuple[str, str, float]]:
        out = [(run_id, "nmae", self.nmae), (run_id, "mape", self.mape)]
        for name in ("nrmse", "nmad", "ssi", "tc"):
            value = getattr(self, name)
            if value is not None:
                out.append((run_id, name, value))
        return out


def evaluate_frames(pred, truth, *, fidelity: bool = False) -> EvalReport:
    """Bundle the standard metrics for predicted-vs-true frame stacks."""
    extra = {}
    if fidelity:
        extra = {
            "nmad": nmad(pred, truth),
            "ssi": ssi(pred, truth),
            "tc": temporal_correlation(pred, truth),
        }
    return EvalReport(
        nmae=nmae(pred, truth),
        mape=mape(pred, truth),
        nrmse=nrmse(pred, truth),
        **extra,
    )
