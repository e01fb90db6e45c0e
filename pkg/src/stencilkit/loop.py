"""Iterative stencil-reduce loops.

Each iteration applies a stencil over the whole grid into a back buffer,
reduces, and then asks the termination condition whether to stop.  The
loop is repeat-until: the body always runs at least once and the condition
is evaluated exactly once per completed iteration, never before the first
step.  Buffers are allocated once and swapped, never reallocated.

Four entry points cover the variants in use:

  loop_stencil_reduce      plain windows, reduce over the new grid
  loop_stencil_reduce_i    windows of (value, index) pairs
  loop_stencil_reduce_d    convergence form; the reduce folds a per-element
                           change measure against the previous grid instead
                           of the new values (the pairs are never built)
  loop_stencil_reduce_s    adds explicit cross-iteration state threaded
                           into the condition; composes with -i and -d

All four drive the same core over an executor.  The sequential executor
here is the reference; the partition runtime provides a parallel one with
identical observable behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from .grid import Grid, indexed_neighborhood_at, neighborhood_at
from .ledger import CopyLedger
from .patterns import (
    Combinator,
    Delta,
    ElementalFn,
    StencilError,
    _check_env,
    _radius,
)

DEFAULT_MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class Condition:
    """Termination test: fn(reduce_value, iteration, state) -> stop?

    Returns True to stop, mirroring an until-style loop condition.  The
    iteration counter starts at 1 on the first call.  max_iterations caps
    runaway loops; hitting the cap is reported, not raised.
    """

    fn: Callable[[Any, int, Any], bool]
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def as_condition(c, max_iterations: Optional[int] = None) -> Condition:
    if isinstance(c, Condition):
        if max_iterations is not None and max_iterations != c.max_iterations:
            return Condition(c.fn, max_iterations)
        return c
    if max_iterations is None:
        return Condition(c)
    return Condition(c, max_iterations)


def stop_after(n: int) -> Condition:
    """Condition that stops once n iterations have completed."""
    if n < 1:
        raise ValueError("iteration count must be >= 1")
    return Condition(lambda value, it, state: it >= n, max_iterations=max(n, 1))


@dataclass(frozen=True)
class LoopState:
    """Opaque user state carried across iterations.

    init is called once before the loop; update runs once per iteration,
    after the stencil and reduce but before the condition, receiving the
    previous state, the iteration number and the fresh reduce value.
    """

    init: Callable[[], Any]
    update: Callable[[Any, int, Any], Any]


@dataclass
class LoopReport:
    """What one loop run did: iteration count, final reduce value, copy
    traffic, and whether the iteration cap cut the run short."""

    iterations: int
    final_reduce: Any
    copies: CopyLedger
    exhausted: bool = False


@dataclass(frozen=True)
class LoopPlan:
    """One iteration's worth of work, shared by all executors."""

    fn: ElementalFn
    k: int
    op: Combinator
    env: Any = None
    indexed: bool = False
    delta: Optional[Delta] = None


def _as_plan(f, k, op, env, indexed, delta) -> LoopPlan:
    k = _radius(f, k)
    if not isinstance(f, ElementalFn):
        f = ElementalFn(point=f, k=k)
    if not isinstance(op, Combinator):
        raise TypeError("op must be a Combinator (it carries the identity)")
    if delta is not None and not isinstance(delta, Delta):
        delta = Delta(delta)
    return LoopPlan(fn=f, k=k, op=op, env=env, indexed=indexed, delta=delta)


class Executor:
    """Protocol for loop executors: begin/step/finish plus abort."""

    def begin(self, plan: LoopPlan, grid: Grid):
        raise NotImplementedError

    def step(self, run) -> Any:
        raise NotImplementedError

    def finish(self, run) -> tuple[Grid, CopyLedger]:
        raise NotImplementedError

    def abort(self, run) -> None:
        pass


class _SeqRun:
    __slots__ = ("plan", "dims", "front", "back", "work", "steps", "allocations")

    def __init__(self, plan, dims, front, back):
        self.plan = plan
        self.dims = dims
        self.front = front
        self.back = back
        self.work = Grid(dims, front)
        self.work.data = front  # alias, not a copy: windows read the live front
        self.steps = 0
        self.allocations = 2


class SequentialExecutor(Executor):
    """Reference executor: one thread, two buffers, per-element windows."""

    def begin(self, plan: LoopPlan, grid: Grid) -> _SeqRun:
        _check_env(plan.env, grid.dims)
        front = list(grid.data)
        back = [None] * len(front)
        return _SeqRun(plan, grid.dims, front, back)

    def step(self, run: _SeqRun) -> Any:
        if run.steps > 0:
            run.front, run.back = run.back, run.front
            run.work.data = run.front
        plan = run.plan
        work = run.work
        window = indexed_neighborhood_at if plan.indexed else neighborhood_at
        fn = plan.fn.point
        env = plan.env
        back = run.back
        op = plan.op
        delta = plan.delta
        acc = op.identity
        opf = op.fn
        pos = 0
        for idx in work.indices():
            nb = window(work, idx, plan.k)
            try:
                new = fn(nb, env)
            except Exception as e:
                raise StencilError(idx, e) from e
            back[pos] = new
            if delta is None:
                acc = opf(acc, new)
            else:
                acc = opf(acc, delta.fn(new, run.front[pos]))
            pos += 1
        run.steps += 1
        return acc

    def finish(self, run: _SeqRun) -> tuple[Grid, CopyLedger]:
        out = Grid(run.dims, list(run.back))
        return out, CopyLedger()


def _drive(plan: LoopPlan, cond, state: Optional[LoopState], grid: Grid,
           executor: Optional[Executor], max_iterations: Optional[int]) -> tuple[Grid, LoopReport]:
    cond = as_condition(cond, max_iterations)
    if executor is None:
        executor = SequentialExecutor()
    run = executor.begin(plan, grid)
    s = state.init() if state is not None else None
    it = 0
    stopped = False
    value = None
    try:
        while True:
            it += 1
            value = executor.step(run)
            if state is not None:
                s = state.update(s, it, value)
            if cond.fn(value, it, s):
                stopped = True
                break
            if it >= cond.max_iterations:
                break
        out, copies = executor.finish(run)
    except BaseException:
        executor.abort(run)
        raise
    return out, LoopReport(iterations=it, final_reduce=value, copies=copies,
                           exhausted=not stopped)


def loop_stencil_reduce(k, f, op: Combinator, cond, a: Grid, env: Any = None,
                        executor: Optional[Executor] = None,
                        max_iterations: Optional[int] = None) -> tuple[Grid, LoopReport]:
    """Repeat { a = stencil(f) : a } until cond(reduce(op, a))."""
    plan = _as_plan(f, k, op, env, indexed=False, delta=None)
    return _drive(plan, cond, None, a, executor, max_iterations)


def loop_stencil_reduce_i(k, f, op: Combinator, cond, a: Grid, env: Any = None,
                          executor: Optional[Executor] = None,
                          max_iterations: Optional[int] = None) -> tuple[Grid, LoopReport]:
    """Indexed variant: f sees (value, index) pairs in its window."""
    plan = _as_plan(f, k, op, env, indexed=True, delta=None)
    return _drive(plan, cond, None, a, executor, max_iterations)


def loop_stencil_reduce_d(k, f, delta, op: Combinator, cond, a: Grid,
                          env: Any = None, executor: Optional[Executor] = None,
                          indexed: bool = False,
                          max_iterations: Optional[int] = None) -> tuple[Grid, LoopReport]:
    """Convergence variant: the condition sees reduce(op, delta(new, old)).

    delta compares each new element with the previous value at the same
    index; the new/old pairs are folded on the fly, never materialised.
    """
    if delta is None:
        raise ValueError("delta is required")
    plan = _as_plan(f, k, op, env, indexed=indexed, delta=delta)
    return _drive(plan, cond, None, a, executor, max_iterations)


def loop_stencil_reduce_s(k, f, op: Combinator, cond, state: LoopState, a: Grid,
                          env: Any = None, executor: Optional[Executor] = None,
                          delta=None, indexed: bool = False,
                          max_iterations: Optional[int] = None) -> tuple[Grid, LoopReport]:
    """Stateful variant; delta and indexed switch in the other behaviours."""
    if not isinstance(state, LoopState):
        raise TypeError("state must be a LoopState")
    if delta is not None and not isinstance(delta, Delta):
        delta = Delta(delta)
    plan = _as_plan(f, k, op, env, indexed=indexed, delta=delta)
    return _drive(plan, cond, state, a, executor, max_iterations)
