"""Multi-partition loop runtime.

Splits a grid across P partitions (evenly for 1D, by rows for 2D, with the
remainder going to the lowest-indexed partitions), gives each partition a
private double buffer with k-deep halo regions, and runs the stencil-reduce
loop with one worker per partition.  The schedule per iteration is:

    stencil on owned ranges -> per-partition partial reduce
    -> host combine (ascending partition order, seeded with the identity)
    -> condition -> halo exchange (only if another iteration follows)
    -> buffer swap

Workers are long-lived threads synchronised by a barrier; one WorkerGroup
can serve many loop runs, which is what stream stages do so they pay the
setup cost once per replica rather than once per item.  All copy traffic
is counted in a CopyLedger.

When the elemental function carries a vectorised block form, partition
buffers are numpy arrays and each worker computes its rows with one kernel
call per iteration; otherwise buffers are plain lists and elements are
computed one window at a time, exactly like the sequential reference.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional

import numpy as np

from .grid import ABSENT, Grid, GridError, IndexedNeighborhood, Neighborhood
from .ledger import CopyLedger
from .loop import Executor, LoopPlan, LoopReport, LoopState, _as_plan, _drive
from .patterns import Combinator, StencilError, _check_env


class DeploymentMode(Enum):
    """How loop instances map onto the partition set.

    ONE_TO_ONE runs each loop instance on a single partition (stream
    replicas provide the parallelism); ONE_TO_N splits every instance
    across P partitions and requires P >= 2.
    """

    ONE_TO_ONE = "1:1"
    ONE_TO_N = "1:n"

    @classmethod
    def parse(cls, text) -> "DeploymentMode":
        if isinstance(text, cls):
            return text
        for m in cls:
            if m.value == text:
                return m
        raise GridError(f"unknown deployment mode {text!r} (expected 1:1 or 1:n)")


@dataclass(frozen=True)
class BlockInfo:
    """Geometry handed to block kernels along with the padded block.

    block[k + r, k + c] corresponds to global element (row0 + r, c); valid
    marks which block cells lie inside the grid.
    """

    row0: int
    rows: int
    cols: int
    dims: tuple
    k: int
    valid: Any


class Partition:
    """One partition's owned range plus its double-buffered local storage."""

    __slots__ = (
        "index", "r_begin", "r_end", "top_halo", "bottom_halo", "width",
        "front", "back", "block_ready", "ctxbuf", "info", "env_block",
        "fill_row",
    )

    def __init__(self, index, r_begin, r_end, top_halo, bottom_halo, width):
        self.index = index
        self.r_begin = r_begin
        self.r_end = r_end
        self.top_halo = top_halo
        self.bottom_halo = bottom_halo
        self.width = width  # None for 1D grids
        self.front = None
        self.back = None
        self.block_ready = False
        self.ctxbuf = None
        self.info = None
        self.env_block = None
        self.fill_row = 0

    @property
    def rows(self) -> int:
        return self.r_end - self.r_begin

    @property
    def owned_elems(self) -> int:
        return self.rows * (self.width or 1)

    def _buf(self, which):
        return self.front if which == "front" else self.back

    def owned_view(self, which):
        buf = self._buf(which)
        return buf[self.top_halo : self.top_halo + self.rows]

    def owned_head(self, which, k):
        """Copy of the first k owned rows (or elements, for 1D)."""
        buf = self._buf(which)
        lo = self.top_halo
        if isinstance(buf, np.ndarray):
            return buf[lo : lo + k].copy()
        if self.width is None:
            return list(buf[lo : lo + k])
        return [list(r) for r in buf[lo : lo + k]]

    def owned_tail(self, which, k):
        buf = self._buf(which)
        hi = self.top_halo + self.rows
        if isinstance(buf, np.ndarray):
            return buf[hi - k : hi].copy()
        if self.width is None:
            return list(buf[hi - k : hi])
        return [list(r) for r in buf[hi - k : hi]]

    def set_top_halo(self, which, rows) -> None:
        buf = self._buf(which)
        k = self.top_halo
        if isinstance(buf, np.ndarray):
            buf[0:k] = rows
        else:
            buf[0:k] = rows

    def set_bottom_halo(self, which, rows) -> None:
        buf = self._buf(which)
        lo = self.top_halo + self.rows
        buf[lo : lo + self.bottom_halo] = rows

    def swap(self) -> None:
        self.front, self.back = self.back, self.front


class PartitionSet:
    """All partitions of one grid plus the shared copy ledger."""

    def __init__(self, dims, k, parts, storage):
        self.dims = tuple(dims)
        self.k = k
        self.parts = parts
        self.storage = storage
        self.ledger = CopyLedger()
        self.buffer_allocations = 2 * len(parts)

    @property
    def P(self) -> int:
        return len(self.parts)

    def swap_all(self) -> None:
        for p in self.parts:
            p.swap()

    def gather(self, which: str = "back") -> Grid:
        """Assemble the owned ranges back into one grid; counts as the
        run's readback."""
        flat: list = []
        for p in self.parts:
            ov = p.owned_view(which)
            if isinstance(ov, np.ndarray):
                flat.extend(ov.ravel().tolist())
            elif p.width is None:
                flat.extend(ov)
            else:
                for row in ov:
                    flat.extend(row)
            self.ledger.record_readback(p.owned_elems)
        return Grid(self.dims, flat)


def _split_ranges(d1: int, P: int) -> list[tuple[int, int]]:
    base, rem = divmod(d1, P)
    ranges = []
    begin = 0
    for i in range(P):
        size = base + (1 if i < rem else 0)
        ranges.append((begin, begin + size))
        begin += size
    return ranges


def partition(a: Grid, P: int, k: int, storage: str = "list") -> PartitionSet:
    """Split a grid into P row partitions with k-deep halos, and load them.

    Each partition must own at least k rows when P > 1, so every halo can
    be served by the adjacent partition alone.  Loading counts one fill
    event per partition; the initial halo contents ride along with it.
    """
    if P < 1:
        raise GridError(f"partition count must be >= 1, got {P}")
    if k < 0:
        raise GridError(f"halo depth must be >= 0, got {k}")
    d1 = a.dims[0]
    if d1 < P:
        raise GridError(f"cannot split {d1} rows across {P} partitions")
    if P > 1 and d1 // P < k:
        raise GridError(
            f"partitions of {d1} rows across {P} are shallower than halo depth {k}"
        )
    width = a.dims[1] if a.ndim == 2 else None
    ranges = _split_ranges(d1, P)
    parts = []
    for i, (lo, hi) in enumerate(ranges):
        top = k if i > 0 else 0
        bottom = k if i < P - 1 else 0
        parts.append(Partition(i, lo, hi, top, bottom, width))
    ps = PartitionSet(a.dims, k, parts, storage)

    if storage == "array":
        full = a.to_array()
        for p in parts:
            p.front = full[p.r_begin - p.top_halo : p.r_end + p.bottom_halo].copy()
            p.back = np.empty_like(p.front)
            ps.ledger.record_fill(p.owned_elems)
        return ps

    rows = a.to_rows()
    for p in parts:
        lo = p.r_begin - p.top_halo
        hi = p.r_end + p.bottom_halo
        if width is None:
            p.front = list(rows[lo:hi])
            p.back = [None] * (hi - lo)
        else:
            p.front = [list(r) for r in rows[lo:hi]]
            p.back = [[None] * width for _ in range(hi - lo)]
        ps.ledger.record_fill(p.owned_elems)
    return ps


def halo_exchange(ps: PartitionSet, which: str = "front") -> None:
    """Refresh every halo from the neighbouring partition's owned rows.

    Moves 2*k*width elements per interior boundary (2*k for 1D) and counts
    two directed copy events per boundary.  Copies are staged through the
    host, which does not change what is counted.
    """
    k = ps.k
    if k == 0 or ps.P == 1:
        return
    per_row = ps.parts[0].width or 1
    for i in range(ps.P - 1):
        a, b = ps.parts[i], ps.parts[i + 1]
        b.set_top_halo(which, a.owned_tail(which, k))
        a.set_bottom_halo(which, b.owned_head(which, k))
        ps.ledger.record_halo(2 * k * per_row, 2)


# ---------------------------------------------------------------------------
# per-partition stencil step


def _to_scalar(v):
    return v.item() if isinstance(v, np.generic) else v


def _step_block(part: Partition, plan: LoopPlan) -> Any:
    k = plan.k
    cb = part.ctxbuf
    rows, cols = part.rows, part.width
    local = part.front
    cb[part.fill_row : part.fill_row + local.shape[0], k : k + cols] = local
    if plan.fn.pad_mode == "edge":
        pad_top = k - part.top_halo
        pad_bottom = k - part.bottom_halo
        if pad_top:
            cb[:pad_top, k : k + cols] = cb[pad_top, k : k + cols]
        if pad_bottom:
            cb[-pad_bottom:, k : k + cols] = cb[-pad_bottom - 1, k : k + cols]
        if k:
            cb[:, :k] = cb[:, k : k + 1]
            cb[:, k + cols :] = cb[:, k + cols - 1 : k + cols]
    try:
        out = np.asarray(plan.fn.block(cb, part.env_block, part.info))
    except Exception as e:
        raise StencilError(None, e, partition=part.index) from e
    if out.shape != (rows, cols):
        raise StencilError(
            None,
            ValueError(f"block kernel returned shape {out.shape}, expected {(rows, cols)}"),
            partition=part.index,
        )
    part.back[part.top_halo : part.top_halo + rows] = out
    new = part.back[part.top_halo : part.top_halo + rows]
    op = plan.op
    if plan.delta is not None:
        old = part.front[part.top_halo : part.top_halo + rows]
        if plan.delta.on_arrays is not None:
            d = np.asarray(plan.delta.on_arrays(new, old))
        else:
            df = plan.delta.fn
            d = np.asarray(
                [df(n, o) for n, o in zip(new.ravel().tolist(), old.ravel().tolist())]
            )
        target = d
    else:
        target = new
    if op.on_array is not None:
        return _to_scalar(op.on_array(target))
    return op.fold(target.ravel().tolist())


def _step_list_2d(part: Partition, plan: LoopPlan, dims) -> Any:
    d1, d2 = dims
    k = plan.k
    w = 2 * k + 1
    fn = plan.fn.point
    env = plan.env
    indexed = plan.indexed
    op = plan.op
    delta = plan.delta.fn if plan.delta is not None else None
    acc = op.identity
    opf = op.fn
    front, back = part.front, part.back
    absent_row = [ABSENT] * w
    for o in range(part.rows):
        gi0 = part.r_begin + o
        lr = part.top_halo + o
        out_row = back[lr]
        old_row = front[lr]
        for j in range(d2):
            entries: list = []
            for a in range(w):
                gi = gi0 - k + a
                if gi < 0 or gi >= d1:
                    entries.extend(absent_row)
                    continue
                src = front[gi - part.r_begin + part.top_halo]
                if indexed:
                    for b in range(w):
                        gj = j - k + b
                        entries.append(
                            (src[gj], (gi, gj)) if 0 <= gj < d2 else ABSENT
                        )
                else:
                    for b in range(w):
                        gj = j - k + b
                        entries.append(src[gj] if 0 <= gj < d2 else ABSENT)
            cls = IndexedNeighborhood if indexed else Neighborhood
            nb = cls(k, (gi0, j), tuple(entries))
            try:
                new = fn(nb, env)
            except Exception as e:
                raise StencilError((gi0, j), e, partition=part.index) from e
            out_row[j] = new
            if delta is None:
                acc = opf(acc, new)
            else:
                acc = opf(acc, delta(new, old_row[j]))
    return acc


def _step_list_1d(part: Partition, plan: LoopPlan, dims) -> Any:
    (d1,) = dims
    k = plan.k
    w = 2 * k + 1
    fn = plan.fn.point
    env = plan.env
    indexed = plan.indexed
    op = plan.op
    delta = plan.delta.fn if plan.delta is not None else None
    acc = op.identity
    opf = op.fn
    front, back = part.front, part.back
    for o in range(part.rows):
        gi0 = part.r_begin + o
        li = part.top_halo + o
        entries: list = []
        for a in range(w):
            gi = gi0 - k + a
            if gi < 0 or gi >= d1:
                entries.append(ABSENT)
            elif indexed:
                entries.append((front[gi - part.r_begin + part.top_halo], (gi,)))
            else:
                entries.append(front[gi - part.r_begin + part.top_halo])
        cls = IndexedNeighborhood if indexed else Neighborhood
        nb = cls(k, (gi0,), tuple(entries))
        try:
            new = fn(nb, env)
        except Exception as e:
            raise StencilError((gi0,), e, partition=part.index) from e
        back[li] = new
        if delta is None:
            acc = opf(acc, new)
        else:
            acc = opf(acc, delta(new, front[li]))
    return acc


def _compute_step(part: Partition, plan: LoopPlan, dims) -> Any:
    if part.block_ready:
        return _step_block(part, plan)
    if len(dims) == 1:
        return _step_list_1d(part, plan, dims)
    return _step_list_2d(part, plan, dims)


def parallel_step(ps: PartitionSet, f, k, op: Combinator, env: Any = None):
    """One stencil step over every partition plus the combined reduce.

    Preconditions: halos are aligned (freshly loaded or exchanged) and k
    matches the partition halo depth.  Owned outputs land in the back
    buffers.  Returns (partials, combined); the combine folds partial
    values in ascending partition order starting from the identity, which
    is the same order the loop engine uses.
    """
    plan = _as_plan(f, k, op, env, indexed=False, delta=None)
    if plan.k != ps.k:
        raise GridError(f"stencil radius {plan.k} does not match halo depth {ps.k}")
    _check_env(env, ps.dims)
    partials = [_compute_step(p, plan, ps.dims) for p in ps.parts]
    combined = op.identity
    for v in partials:
        combined = op.fn(combined, v)
    return partials, combined


# ---------------------------------------------------------------------------
# worker group


class _RunContext:
    __slots__ = ("plan", "dims", "parts", "partials", "errors", "cont")

    def __init__(self, plan, dims, parts):
        self.plan = plan
        self.dims = dims
        self.parts = parts
        self.partials = [None] * len(parts)
        self.errors = [None] * len(parts)
        self.cont = True


class WorkerGroup:
    """P long-lived worker threads for partitioned loop runs.

    A group is created once and reused across any number of runs; stream
    stages keep one per replica.  Only one run may be active at a time.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ValueError(f"worker group size must be >= 1, got {size}")
        self.size = size
        self._barrier = threading.Barrier(size + 1)
        self._cmd = "idle"
        self._ctx: Optional[_RunContext] = None
        self._busy = False
        self._closed = False
        self._threads = [
            threading.Thread(
                target=self._worker_main, args=(i,), daemon=True,
                name=f"stencil-worker-{i}",
            )
            for i in range(size)
        ]
        for t in self._threads:
            t.start()

    def _worker_main(self, i: int) -> None:
        while True:
            self._barrier.wait()
            if self._cmd == "stop":
                return
            ctx = self._ctx
            part = ctx.parts[i]
            while True:
                partial, err = None, None
                try:
                    partial = _compute_step(part, ctx.plan, ctx.dims)
                except Exception as e:  # kept: a worker must reach the barrier
                    err = e
                ctx.partials[i] = partial
                ctx.errors[i] = err
                self._barrier.wait()  # compute done
                self._barrier.wait()  # decision published
                if not ctx.cont:
                    break

    def start_run(self, ctx: _RunContext) -> None:
        if self._closed:
            raise RuntimeError("worker group is closed")
        if self._busy:
            raise RuntimeError("worker group already has an active run")
        self._busy = True
        self._ctx = ctx
        self._cmd = "run"
        self._barrier.wait()

    def wait_compute(self) -> None:
        self._barrier.wait()

    def publish(self) -> None:
        self._barrier.wait()

    def end_run(self) -> None:
        self._busy = False
        self._ctx = None

    def close(self) -> None:
        if self._closed:
            return
        if self._busy:
            raise RuntimeError("cannot close a worker group with an active run")
        self._closed = True
        self._cmd = "stop"
        self._barrier.wait()
        for t in self._threads:
            t.join()

    def __enter__(self) -> "WorkerGroup":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# ---------------------------------------------------------------------------
# parallel executor


class _ParRun:
    __slots__ = ("ps", "ctx", "group", "owns_group", "steps", "released")

    def __init__(self, ps, ctx, group, owns_group):
        self.ps = ps
        self.ctx = ctx
        self.group = group
        self.owns_group = owns_group
        self.steps = 0
        self.released = False


def _prepare_block(ps: PartitionSet, plan: LoopPlan) -> None:
    k = plan.k
    d2 = ps.dims[1]
    env = plan.env
    env_pads = None
    if env is not None:
        grids = env if isinstance(env, tuple) else (env,)
        env_pads = [
            np.pad(g.to_array(), k, mode="constant") if isinstance(g, Grid) else None
            for g in grids
        ]
    for p in ps.parts:
        rows = p.rows
        p.block_ready = True
        p.fill_row = k - p.top_halo
        p.ctxbuf = np.empty((rows + 2 * k, d2 + 2 * k), dtype=p.front.dtype)
        if plan.fn.pad_mode == "constant":
            p.ctxbuf.fill(plan.fn.pad_value)
        ctx_rows = np.arange(p.r_begin - k, p.r_end + k)
        row_ok = (ctx_rows >= 0) & (ctx_rows < ps.dims[0])
        col_ok = np.zeros(d2 + 2 * k, dtype=bool)
        col_ok[k : k + d2] = True
        valid = row_ok[:, None] & col_ok[None, :]
        p.info = BlockInfo(row0=p.r_begin, rows=rows, cols=d2, dims=ps.dims,
                           k=k, valid=valid)
        if env_pads is not None:
            views = tuple(
                ep[p.r_begin : p.r_end + 2 * k] if ep is not None else None
                for ep in env_pads
            )
            p.env_block = views if isinstance(env, tuple) else views[0]


def _block_capable(plan: LoopPlan, grid: Grid) -> bool:
    if plan.fn.block is None or grid.ndim != 2:
        return False
    env = plan.env
    if env is not None:
        grids = env if isinstance(env, tuple) else (env,)
        if any(not isinstance(g, Grid) for g in grids):
            return False
    probe = np.asarray(grid.data[:1])
    return probe.dtype != object


class ParallelExecutor(Executor):
    """Loop executor running one worker thread per partition."""

    def __init__(self, partitions: int, group: Optional[WorkerGroup] = None):
        if group is not None and group.size != partitions:
            raise ValueError(
                f"worker group size {group.size} does not match partitions {partitions}"
            )
        self.partitions = partitions
        self._group = group

    def begin(self, plan: LoopPlan, grid: Grid) -> _ParRun:
        _check_env(plan.env, grid.dims)
        block = _block_capable(plan, grid)
        ps = partition(grid, self.partitions, plan.k,
                       storage="array" if block else "list")
        if block:
            _prepare_block(ps, plan)
        group = self._group
        owns = group is None
        if owns:
            group = WorkerGroup(self.partitions)
        ctx = _RunContext(plan, ps.dims, ps.parts)
        try:
            group.start_run(ctx)
        except BaseException:
            if owns:
                group.close()
            raise
        return _ParRun(ps, ctx, group, owns)

    def step(self, run: _ParRun) -> Any:
        if run.steps > 0:
            # Workers are parked; refresh halos from the freshly written
            # back buffers, then swap, then release them into the next
            # iteration.
            halo_exchange(run.ps, which="back")
            run.ps.swap_all()
            run.ctx.cont = True
            run.group.publish()
        run.steps += 1
        run.group.wait_compute()
        err = next((e for e in run.ctx.errors if e is not None), None)
        if err is not None:
            self._release(run)
            raise err
        op = run.ctx.plan.op
        combined = op.identity
        for v in run.ctx.partials:
            combined = op.fn(combined, v)
        return combined

    def _release(self, run: _ParRun) -> None:
        if run.released:
            return
        run.ctx.cont = False
        run.group.publish()
        run.group.end_run()
        run.released = True
        if run.owns_group:
            run.group.close()

    def finish(self, run: _ParRun) -> tuple[Grid, CopyLedger]:
        self._release(run)
        out = run.ps.gather("back")
        return out, run.ps.ledger.snapshot()

    def abort(self, run: _ParRun) -> None:
        self._release(run)


def parallel_loop(mode, partitions: int, k, f, op: Combinator, cond, a: Grid,
                  env: Any = None, *, delta=None, indexed: bool = False,
                  state: Optional[LoopState] = None,
                  group: Optional[WorkerGroup] = None,
                  max_iterations: Optional[int] = None) -> tuple[Grid, LoopReport]:
    """Partitioned stencil-reduce loop.

    In ONE_TO_N mode the grid is split across `partitions` workers (at
    least 2); in ONE_TO_ONE mode the loop runs on a single partition and
    any wider parallelism comes from running many loops concurrently, one
    per stream item.  Results are elementwise identical to the sequential
    loop for the same arguments.
    """
    mode = DeploymentMode.parse(mode)
    if partitions < 1:
        raise GridError(f"partition count must be >= 1, got {partitions}")
    if mode is DeploymentMode.ONE_TO_N and partitions < 2:
        raise GridError("1:n deployment needs at least 2 partitions")
    eff = partitions if mode is DeploymentMode.ONE_TO_N else 1
    if group is not None and group.size != eff:
        raise GridError(
            f"worker group size {group.size} does not match {eff} partitions"
        )
    plan = _as_plan(f, k, op, env, indexed=indexed, delta=delta)
    executor = ParallelExecutor(eff, group)
    return _drive(plan, cond, state, a, executor, max_iterations)
