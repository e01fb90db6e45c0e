"""Benchmark rows and CSV emission."""

import csv
import io

import pytest

from stencilkit.bench import COLUMNS, BenchRow, RunSpec, emit_csv
from stencilkit.grid import GridError
from stencilkit.ledger import CopyLedger
from stencilkit.loop import LoopReport


def row(**overrides):
    base = dict(app="gol", input_id="soup-8x8", partitions=1, width=1,
                mode="1:1", seed=42, iterations=10, wall_ms=1.5,
                fill_events=1, halo_elems=0, readback_events=1,
                reduce_final=3.0)
    base.update(overrides)
    return BenchRow(**base)


def test_run_spec_validation():
    RunSpec(app="gol", input_id="x", partitions=2, width=1, mode="1:n", seed=0)
    with pytest.raises(GridError):
        RunSpec(app="gol", input_id="x", partitions=1, width=1, mode="1:n", seed=0)
    with pytest.raises(GridError):
        RunSpec(app="gol", input_id="x", partitions=0, width=1, mode="1:1", seed=0)
    with pytest.raises(GridError):
        RunSpec(app="gol", input_id="x", partitions=1, width=0, mode="1:1", seed=0)
    with pytest.raises(GridError):
        RunSpec(app="", input_id="x", partitions=1, width=1, mode="1:1", seed=0)
    with pytest.raises(GridError):
        RunSpec(app="gol", input_id="x", partitions=1, width=1, mode="2:2", seed=0)


def test_row_from_run_copies_ledger_fields():
    ledger = CopyLedger()
    ledger.record_fill(32)
    ledger.record_fill(32)
    ledger.record_readback(32)
    ledger.record_readback(32)
    ledger.record_halo(24, 4)
    report = LoopReport(iterations=7, final_reduce=1.25, copies=ledger,
                        exhausted=False)
    spec = RunSpec(app="helmholtz", input_id="unit-8x8", partitions=2,
                   width=1, mode="1:n", seed=9)
    got = BenchRow.from_run(spec, report, wall_ms=12.0)
    assert got.iterations == 7
    assert got.reduce_final == 1.25
    assert got.fill_events == 2
    assert got.readback_events == 2
    assert got.halo_elems == 24
    assert got.seed == 9
    assert got.mode == "1:n"


def test_header_matches_column_tuple():
    text = emit_csv([])
    assert text.splitlines() == [",".join(COLUMNS)]


def test_rows_sort_by_input_then_partitions_width_mode():
    rows = [
        row(input_id="b", partitions=4),
        row(input_id="a", partitions=2, width=2),
        row(input_id="a", partitions=2, width=1),
        row(input_id="a", partitions=1),
        row(app="sobel", input_id="a"),
    ]
    text = emit_csv(rows)
    got = [tuple(r.split(",")[:4]) for r in text.splitlines()[1:]]
    assert got == [
        ("gol", "a", "1", "1"),
        ("gol", "a", "2", "1"),
        ("gol", "a", "2", "2"),
        ("gol", "b", "4", "1"),
        ("sobel", "a", "1", "1"),
    ]


def test_float_cells_use_short_general_format():
    text = emit_csv([row(wall_ms=1234.56789, reduce_final=0.000123456789)])
    record = text.splitlines()[1].split(",")
    assert record[COLUMNS.index("wall_ms")] == "1234.57"
    assert record[COLUMNS.index("reduce_final")] == "0.000123457"


def test_commas_in_fields_are_quoted():
    text = emit_csv([row(input_id='soup,8x8"q')])
    parsed = list(csv.reader(io.StringIO(text)))
    assert parsed[1][COLUMNS.index("input_id")] == 'soup,8x8"q'


def test_emit_to_path_matches_returned_text(tmp_path):
    p = tmp_path / "out.csv"
    text = emit_csv([row(), row(partitions=2, mode="1:n")], out=p)
    assert p.read_bytes().decode("ascii") == text


def test_emission_is_deterministic():
    rows = [row(partitions=p) for p in (4, 1, 2)]
    assert emit_csv(rows) == emit_csv(list(reversed(rows)))
