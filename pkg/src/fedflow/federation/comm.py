"""Communication-cost accounting for the synchronous round loop."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..numerics import ParamVector

# Per-round per-client payloads (MB) reported for the full-scale model
# configurations on the original ride-sharing benchmark; documentation
# reference only — desk-scale configs are far smaller.
COMM_COST_REFERENCE_MB = {
    "diffusion": 47.52,
    "gru": 0.27,
    "tau": 50.76,
    "gatau": 48.40,
}


def comm_cost(params: ParamVector) -> int:
    """Bytes exchanged per client per round per direction: one full model."""
    return params.nbytes


@dataclass(frozen=True)
class CommRow:
    round_index: int
    client_id: int
    bytes_down: int
    bytes_up: int


@dataclass
class CommCostLedger:
    rows: list[CommRow] = field(default_factory=list)

    def record_round(self, round_index: int, client_ids: list[int], payload_bytes: int) -> None:
        for client_id in client_ids:
            self.rows.append(CommRow(round_index, client_id, payload_bytes, payload_bytes))

    @property
    def total_down(self) -> int:
        return sum(r.bytes_down for r in self.rows)

    @property
    def total_up(self) -> int:
        return sum(r.bytes_up for r in self.rows)

    @property
    def total(self) -> int:
        return self.total_down + self.total_up
