"""Stream-parallel composition: pipelines and ordered farms.

Stages are connected by bounded single-producer single-consumer queues and
each runs on its own thread, so different stages overlap on different
items while any one stage sees items strictly in order.  An ordered farm
replicates a stage W ways with on-demand dispatch and restores the input
order at its collector, buffering at most W out-of-order completions.

End of stream is an explicit sentinel.  A stage failure on one item does
not kill the stream: the item continues downstream as a poisoned carrier
of its error and sequence number and is surfaced in the report.  Failures
of the source or the sink abort the whole run.
"""

from __future__ import annotations

import itertools
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

DEFAULT_CAPACITY = 8

_END = object()  # end-of-stream sentinel


class StreamError(RuntimeError):
    """Raised when the source or sink fails; stage failures only poison
    the item they were processing."""


@dataclass
class StreamItem:
    seq: int
    payload: Any


@dataclass
class _Poison:
    """Payload wrapper for a failed item; flows through untouched."""

    error: Exception


class _TrackedQueue(queue.Queue):
    """Bounded queue that records its high-water mark."""

    def __init__(self, maxsize: int):
        super().__init__(maxsize)
        self.max_depth = 0

    def _put(self, item):
        super()._put(item)
        if self._qsize() > self.max_depth:
            self.max_depth = self._qsize()


class Stage:
    """One pipeline stage: a per-item function plus queue capacity.

    fn may be given directly, or built per worker thread via factory (for
    stages that carry private state such as a warm worker group).  A
    factory-produced callable with a close() method is closed when the
    stream ends.
    """

    def __init__(self, fn: Optional[Callable] = None, *,
                 factory: Optional[Callable] = None,
                 name: Optional[str] = None,
                 capacity: int = DEFAULT_CAPACITY):
        if (fn is None) == (factory is None):
            raise ValueError("provide exactly one of fn or factory")
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.fn = fn
        self.factory = factory
        self.name = name or getattr(fn, "__name__", None) or "stage"
        self.capacity = capacity

    def make_fn(self):
        if self.factory is not None:
            return self.factory()
        return self.fn


class Pipeline:
    """Stages composed in sequence; a single-stage pipeline behaves
    exactly like the stage itself."""

    def __init__(self, nodes):
        if not nodes:
            raise ValueError("pipeline needs at least one stage")
        self.nodes = nodes


class OrderedFarm:
    """W replicas of one stage with order-preserving collection."""

    def __init__(self, inner: Stage, width: int):
        if width < 1:
            raise ValueError("farm width must be >= 1")
        self.inner = inner
        self.width = width


def _as_node(obj):
    if isinstance(obj, (Stage, Pipeline, OrderedFarm)):
        return obj
    if callable(obj):
        return Stage(obj)
    raise TypeError(f"not a stage: {obj!r}")


def pipeline(*stages) -> Pipeline:
    """Compose stages (or bare callables) into a pipeline."""
    if len(stages) == 1 and isinstance(stages[0], (list, tuple)):
        stages = tuple(stages[0])
    return Pipeline([_as_node(s) for s in stages])


def ordered_farm(inner, width: int) -> OrderedFarm:
    """Replicate a stage width ways, preserving item order end to end."""
    inner = _as_node(inner)
    if not isinstance(inner, Stage):
        raise TypeError("ordered_farm replicates a single stage")
    return OrderedFarm(inner, width)


@dataclass
class StageStats:
    name: str
    items: int = 0
    busy_s: float = 0.0


@dataclass
class StreamReport:
    """Totals for one stream run; items_in == items_out + len(failures)."""

    items_in: int = 0
    items_out: int = 0
    failures: list = field(default_factory=list)
    wall_s: float = 0.0
    stages: list = field(default_factory=list)
    max_queue_depth: int = 0
    max_reorder_buffer: int = 0


class _Wiring:
    def __init__(self):
        self.threads: list[threading.Thread] = []
        self.queues: list[_TrackedQueue] = []
        self.stats: list[StageStats] = []
        self.names: set[str] = set()
        self.max_reorder = 0
        self._lock = threading.Lock()

    def new_queue(self, capacity: int) -> _TrackedQueue:
        q = _TrackedQueue(capacity)
        self.queues.append(q)
        return q

    def new_stats(self, name: str) -> StageStats:
        base, n = name, 1
        while name in self.names:
            n += 1
            name = f"{base}-{n}"
        self.names.add(name)
        st = StageStats(name)
        self.stats.append(st)
        return st

    def spawn(self, target, *args) -> None:
        t = threading.Thread(target=target, args=args, daemon=True)
        self.threads.append(t)
        t.start()

    def note_reorder(self, depth: int) -> None:
        with self._lock:
            if depth > self.max_reorder:
                self.max_reorder = depth


def _stage_worker(stage: Stage, stats: StageStats, lock, in_q, out_q) -> None:
    fn = stage.make_fn()
    try:
        while True:
            item = in_q.get()
            if item is _END:
                out_q.put(_END)
                return
            if isinstance(item.payload, _Poison):
                out_q.put(item)
                continue
            t0 = time.perf_counter()
            try:
                result = fn(item.payload)
            except Exception as e:
                out_q.put(StreamItem(item.seq, _Poison(e)))
                continue
            finally:
                dt = time.perf_counter() - t0
                with lock:
                    stats.items += 1
                    stats.busy_s += dt
            out_q.put(StreamItem(item.seq, result))
    finally:
        close = getattr(fn, "close", None)
        if close is not None and fn is not stage.fn:
            close()


def _farm_emitter(width: int, in_q, work_q, credits) -> None:
    # credits keep at most W tags outstanding past the collector's next
    # in-order emission, which bounds its reorder buffer at W
    counter = itertools.count()
    while True:
        item = in_q.get()
        if item is _END:
            for _ in range(width):
                work_q.put(_END)
            return
        credits.acquire()
        work_q.put((next(counter), item))


def _farm_replica(stage: Stage, stats: StageStats, lock, work_q, result_q) -> None:
    fn = stage.make_fn()
    try:
        while True:
            task = work_q.get()
            if task is _END:
                result_q.put(_END)
                return
            local_seq, item = task
            if isinstance(item.payload, _Poison):
                result_q.put((local_seq, item))
                continue
            t0 = time.perf_counter()
            try:
                result = StreamItem(item.seq, fn(item.payload))
            except Exception as e:
                result = StreamItem(item.seq, _Poison(e))
            finally:
                dt = time.perf_counter() - t0
                with lock:
                    stats.items += 1
                    stats.busy_s += dt
            result_q.put((local_seq, result))
    finally:
        close = getattr(fn, "close", None)
        if close is not None and fn is not stage.fn:
            close()


def _farm_collector(width: int, wiring: _Wiring, result_q, out_q, credits) -> None:
    pending: dict[int, StreamItem] = {}
    next_seq = 0
    ends = 0
    while True:
        msg = result_q.get()
        if msg is _END:
            ends += 1
            if ends == width:
                out_q.put(_END)
                return
            continue
        local_seq, item = msg
        pending[local_seq] = item
        wiring.note_reorder(len(pending))
        while next_seq in pending:
            out_q.put(pending.pop(next_seq))
            next_seq += 1
            credits.release()


def _entry_capacity(node) -> int:
    if isinstance(node, Pipeline):
        return _entry_capacity(node.nodes[0])
    if isinstance(node, OrderedFarm):
        return node.inner.capacity
    return node.capacity


def _build(node, wiring: _Wiring, in_q, lock):
    if isinstance(node, Pipeline):
        q = in_q
        for sub in node.nodes:
            q = _build(sub, wiring, q, lock)
        return q
    if isinstance(node, OrderedFarm):
        stage = node.inner
        work_q = wiring.new_queue(stage.capacity)
        result_q = wiring.new_queue(max(node.width, stage.capacity))
        out_q = wiring.new_queue(stage.capacity)
        credits = threading.Semaphore(node.width)
        wiring.spawn(_farm_emitter, node.width, in_q, work_q, credits)
        for _ in range(node.width):
            stats = wiring.new_stats(stage.name)
            wiring.spawn(_farm_replica, stage, stats, lock, work_q, result_q)
        wiring.spawn(_farm_collector, node.width, wiring, result_q, out_q,
                     credits)
        return out_q
    if isinstance(node, Stage):
        out_q = wiring.new_queue(node.capacity)
        stats = wiring.new_stats(node.name)
        wiring.spawn(_stage_worker, node, stats, lock, in_q, out_q)
        return out_q
    raise TypeError(f"not a stage: {node!r}")


def run_stream(source: Iterable, top, sink: Callable[[Any], Any]) -> StreamReport:
    """Push every source item through the stage graph into the sink.

    The sink runs on the calling thread and sees successful items in
    stream order; poisoned items are collected into the report instead.
    Source or sink failure aborts the run with a StreamError after the
    in-flight items have drained.
    """
    top = _as_node(top)
    wiring = _Wiring()
    lock = threading.Lock()
    in_q = wiring.new_queue(_entry_capacity(top))
    cancel = threading.Event()
    fed = [0]
    source_error: list = []

    def feeder():
        try:
            for seq, payload in enumerate(source):
                if cancel.is_set():
                    break
                in_q.put(StreamItem(seq, payload))
                fed[0] += 1
        except Exception as e:
            source_error.append(e)
        finally:
            in_q.put(_END)

    t0 = time.perf_counter()
    wiring.spawn(feeder)
    out_q = _build(top, wiring, in_q, lock)

    report = StreamReport()
    sink_failure = None
    while True:
        item = out_q.get()
        if item is _END:
            break
        if isinstance(item.payload, _Poison):
            report.failures.append((item.seq, item.payload.error))
            continue
        if sink_failure is not None:
            continue  # draining after a sink error
        try:
            sink(item.payload)
            report.items_out += 1
        except Exception as e:
            sink_failure = (item.seq, e)
            cancel.set()

    for t in wiring.threads:
        t.join()
    report.wall_s = time.perf_counter() - t0
    report.items_in = fed[0]
    report.stages = wiring.stats
    report.max_queue_depth = max((q.max_depth for q in wiring.queues), default=0)
    report.max_reorder_buffer = wiring.max_reorder
    if source_error:
        raise StreamError(f"stream source failed: {source_error[0]!r}") from source_error[0]
    if sink_failure is not None:
        seq, e = sink_failure
        raise StreamError(f"stream sink failed on item {seq}: {e!r}") from e
    return report
