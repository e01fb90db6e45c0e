"""Benchmark run descriptions and CSV emission.

One BenchRow per run.  Column order is fixed so downstream plotting
scripts can rely on it, rows are sorted on emit, floats go out with six
significant digits, and quoting follows RFC 4180 (the csv module's
default dialect).
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, fields
from typing import Iterable, Union

from .grid import GridError
from .partition import DeploymentMode

COLUMNS = (
    "app",
    "input_id",
    "partitions",
    "width",
    "mode",
    "seed",
    "iterations",
    "wall_ms",
    "fill_events",
    "halo_elems",
    "readback_events",
    "reduce_final",
)


@dataclass(frozen=True)
class RunSpec:
    """What to run: app name, problem id, and the deployment shape."""

    app: str
    input_id: str
    partitions: int = 1
    width: int = 1
    mode: DeploymentMode = DeploymentMode.ONE_TO_ONE
    seed: int = 42

    def __post_init__(self):
        if not self.app:
            raise GridError("app name must be non-empty")
        if self.partitions < 1:
            raise GridError(f"partitions must be >= 1, got {self.partitions}")
        if self.width < 1:
            raise GridError(f"width must be >= 1, got {self.width}")
        mode = DeploymentMode.parse(self.mode)
        object.__setattr__(self, "mode", mode)
        if mode is DeploymentMode.ONE_TO_N and self.partitions < 2:
            raise GridError("1:n deployment needs at least 2 partitions")


@dataclass(frozen=True)
class BenchRow:
    """Measured outcome of one run, one CSV line."""

    app: str
    input_id: str
    partitions: int
    width: int
    mode: str
    seed: int
    iterations: int
    wall_ms: float
    fill_events: int
    halo_elems: int
    readback_events: int
    reduce_final: float

    @classmethod
    def from_run(cls, spec: RunSpec, report, wall_ms: float) -> "BenchRow":
        """Fold a RunSpec and a finished LoopReport into a row."""
        c = report.copies
        return cls(
            app=spec.app,
            input_id=spec.input_id,
            partitions=spec.partitions,
            width=spec.width,
            mode=spec.mode.value,
            seed=spec.seed,
            iterations=report.iterations,
            wall_ms=wall_ms,
            fill_events=c.fill_events,
            halo_elems=c.halo_elems,
            readback_events=c.readback_events,
            reduce_final=report.final_reduce,
        )


assert tuple(f.name for f in fields(BenchRow)) == COLUMNS


def _cell(value) -> str:
    if isinstance(value, bool):
        raise GridError("bool has no CSV representation here")
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _sort_key(row: BenchRow):
    return (row.app, row.input_id, row.partitions, row.width, row.mode, row.seed)


def emit_csv(rows: Iterable[BenchRow],
             out: Union[str, os.PathLike, io.TextIOBase, None] = None) -> str:
    """Serialise rows (sorted, header first) and return the CSV text.

    out may be a path or an open text file; either way the text is also
    returned.
    """
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(COLUMNS)
    for row in sorted(rows, key=_sort_key):
        writer.writerow([_cell(getattr(row, name)) for name in COLUMNS])
    text = buf.getvalue()
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", newline="", encoding="ascii") as fh:
            fh.write(text)
    elif out is not None:
        out.write(text)
    return text
