"""Copy accounting for partitioned runs.

Counts element traffic between the host grid and partition-local buffers.
Element counts and event counts are tracked separately so tests can pin
both the arithmetic and the schedule shape.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass
class CopyLedger:
    """Counters for host/partition data movement during one loop run.

    full_fill_elems    elements loaded host -> partitions before iteration 1
    readback_elems     elements read back after the loop ends
    halo_elems         elements moved between partitions by halo exchanges
    fill_events        one per partition filled
    readback_events    one per partition read back
    halo_events        one per directed neighbour copy
    """

    full_fill_elems: int = 0
    readback_elems: int = 0
    halo_elems: int = 0
    fill_events: int = 0
    readback_events: int = 0
    halo_events: int = 0

    def record_fill(self, elems: int) -> None:
        self.full_fill_elems += elems
        self.fill_events += 1

    def record_readback(self, elems: int) -> None:
        self.readback_elems += elems
        self.readback_events += 1

    def record_halo(self, elems: int, events: int) -> None:
        self.halo_elems += elems
        self.halo_events += events

    def snapshot(self) -> "CopyLedger":
        return replace(self)
