"""Jacobi iteration for the 2D Helmholtz equation on a uniform grid.

Each sweep relaxes every interior point against its four neighbours and
the right-hand side; out-of-grid neighbours read as zero (Dirichlet
boundary).  Convergence is judged by the root mean square of the
per-element change, which is exactly what the loop's delta reduce
provides, so the solver is a direct use of the convergence loop variant.

The update for a point u with neighbours l, r (same row) and u_up, u_dn
(same column), spacing dx/dy and right-hand side f is

    ax = 1/dx^2,  ay = 1/dy^2,  b = 2*ax + 2*ay + alpha
    u' = (1 - relax) * u + relax * (f + ax*(l + r) + ay*(u_up + u_dn)) / b

and the loop stops when sqrt(sum((u' - u)^2) / (n*m)) < tol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..grid import ABSENT, Grid, GridError
from ..loop import Condition, LoopReport
from ..partition import DeploymentMode, WorkerGroup, parallel_loop
from ..patterns import Combinator, Delta, ElementalFn


@dataclass(frozen=True)
class HelmholtzConfig:
    rows: int
    cols: int
    alpha: float = 1.0
    dx: float = 1.0
    dy: float = 1.0
    relax: float = 1.0
    tol: float = 1e-6
    max_iterations: int = 10_000

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GridError(f"bad grid shape {self.rows}x{self.cols}")
        if self.alpha <= 0:
            raise GridError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.relax <= 1:
            raise GridError(f"relax must be in (0, 1], got {self.relax}")
        if self.tol <= 0:
            raise GridError(f"tol must be positive, got {self.tol}")
        if self.dx <= 0 or self.dy <= 0:
            raise GridError("grid spacing must be positive")

    @property
    def ax(self) -> float:
        return 1.0 / (self.dx * self.dx)

    @property
    def ay(self) -> float:
        return 1.0 / (self.dy * self.dy)

    @property
    def b(self) -> float:
        return 2.0 * self.ax + 2.0 * self.ay + self.alpha


def helmholtz_kernel(cfg: HelmholtzConfig) -> ElementalFn:
    ax, ay, b, relax = cfg.ax, cfg.ay, cfg.b, cfg.relax
    keep = 1.0 - relax

    def point(nb, env):
        c = nb.center
        left = nb.at(0, -1)
        right = nb.at(0, 1)
        up = nb.at(-1, 0)
        down = nb.at(1, 0)
        left = 0.0 if left is ABSENT else left
        right = 0.0 if right is ABSENT else right
        up = 0.0 if up is ABSENT else up
        down = 0.0 if down is ABSENT else down
        f = env.at(*nb.center_index)
        return keep * c + relax * (f + ax * (left + right) + ay * (up + down)) / b

    def block(blk, env_block, info):
        c = blk[1:-1, 1:-1]
        left = blk[1:-1, :-2]
        right = blk[1:-1, 2:]
        up = blk[:-2, 1:-1]
        down = blk[2:, 1:-1]
        f = env_block[1:-1, 1:-1]
        return keep * c + relax * (f + ax * (left + right) + ay * (up + down)) / b

    return ElementalFn(point=point, k=1, block=block,
                       pad_mode="constant", pad_value=0.0)


def _sq_change() -> Delta:
    return Delta(lambda new, old: (new - old) ** 2,
                 on_arrays=lambda new, old: (new - old) ** 2)


def _sum_op() -> Combinator:
    return Combinator(lambda a, b: a + b, 0.0,
                      on_array=lambda arr: float(np.sum(arr)))


def helmholtz_solve(cfg: HelmholtzConfig, rhs: Grid, u0: Optional[Grid] = None,
                    *, partitions: int = 1, mode=DeploymentMode.ONE_TO_N,
                    group: Optional[WorkerGroup] = None) -> tuple[Grid, LoopReport]:
    """Iterate to tolerance; returns the solution grid and the run report.

    The report's final reduce is the last summed squared change, so
    sqrt(final_reduce / (rows*cols)) is the final RMS step size.
    """
    dims = (cfg.rows, cfg.cols)
    if rhs.dims != dims:
        raise GridError(f"rhs dims {rhs.dims} do not match config {dims}")
    if u0 is None:
        u0 = Grid.filled(dims, 0.0)
    elif u0.dims != dims:
        raise GridError(f"u0 dims {u0.dims} do not match config {dims}")
    u0 = Grid(dims, [float(v) for v in u0.data])
    rhs = Grid(dims, [float(v) for v in rhs.data])
    n_elems = cfg.rows * cfg.cols
    tol = cfg.tol

    cond = Condition(
        lambda value, it, state: math.sqrt(value / n_elems) < tol,
        max_iterations=cfg.max_iterations,
    )
    if partitions == 1:
        mode = DeploymentMode.ONE_TO_ONE
    return parallel_loop(mode, partitions, 1, helmholtz_kernel(cfg), _sum_op(),
                         cond, u0, env=rhs, delta=_sq_change(), group=group)
