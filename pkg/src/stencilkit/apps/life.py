"""Conway's Game of Life as a stencil-reduce loop.

Cells are 0 or 1, with out-of-grid neighbours counting as dead.  A cell
lives next generation iff it has exactly three live neighbours, or it is
alive with exactly two.  The reduce tracks total liveness, which the
termination condition can watch (fixed step counts are the common case).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..grid import ABSENT, Grid, GridError
from ..loop import Condition, LoopReport, stop_after
from ..partition import DeploymentMode, WorkerGroup, parallel_loop
from ..patterns import Combinator, ElementalFn

_RING = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def _life_point(nb, env) -> int:
    alive = 0
    for di, dj in _RING:
        v = nb.at(di, dj)
        if v is not ABSENT and v:
            alive += 1
    if alive == 3:
        return 1
    return 1 if (nb.center and alive == 2) else 0


def _life_block(block, env_block, info):
    a = block
    s = (
        a[:-2, :-2] + a[:-2, 1:-1] + a[:-2, 2:]
        + a[1:-1, :-2] + a[1:-1, 2:]
        + a[2:, :-2] + a[2:, 1:-1] + a[2:, 2:]
    )
    c = a[1:-1, 1:-1]
    return ((s == 3) | ((c == 1) & (s == 2))).astype(a.dtype)


life_kernel = ElementalFn(point=_life_point, k=1, block=_life_block,
                          pad_mode="constant", pad_value=0)


def liveness_op() -> Combinator:
    """Sum of live cells."""
    return Combinator(lambda a, b: a + b, 0, on_array=lambda arr: int(np.sum(arr)))


@dataclass(frozen=True)
class GolConfig:
    """Board shape plus a stopping rule: a fixed number of steps, or run
    until total liveness drops below min_liveness."""

    rows: int
    cols: int
    steps: Optional[int] = None
    min_liveness: Optional[int] = None
    max_iterations: int = 10_000

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GridError(f"bad board shape {self.rows}x{self.cols}")
        if (self.steps is None) == (self.min_liveness is None):
            raise GridError("choose exactly one of steps or min_liveness")
        if self.steps is not None and self.steps < 1:
            raise GridError("steps must be >= 1")

    def condition(self) -> Condition:
        if self.steps is not None:
            return stop_after(self.steps)
        floor = self.min_liveness
        return Condition(lambda value, it, state: value < floor,
                         max_iterations=self.max_iterations)


def _check_binary(seed: Grid) -> None:
    for v in seed.data:
        if v != 0 and v != 1:
            raise GridError(f"life board must be 0/1, found {v!r}")


def game_of_life(seed: Grid, cond=None, *, config: Optional[GolConfig] = None,
                 partitions: int = 1, mode=DeploymentMode.ONE_TO_N,
                 group: Optional[WorkerGroup] = None) -> tuple[Grid, LoopReport]:
    """Run the board until the condition stops it.

    Pass either an explicit condition or a GolConfig.  The final reduce in
    the report is the total liveness of the returned board.
    """
    if seed.ndim != 2:
        raise GridError("life board must be 2D")
    _check_binary(seed)
    if cond is None:
        if config is None:
            raise GridError("need a condition or a config")
        cond = config.condition()
    if partitions == 1:
        mode = DeploymentMode.ONE_TO_ONE
    return parallel_loop(mode, partitions, 1, life_kernel, liveness_op(), cond,
                         seed, group=group)
