"""Data-parallel building blocks: map, reduce and the stencil operator.

These are the sequential reference implementations.  Everything else in the
package (loop drivers, the multi-partition runtime) is specified against
the behaviour of the functions in this module, so they stay deliberately
simple: one pass, row-major order, no storage tricks.

An elemental function consumes a Neighborhood (or IndexedNeighborhood) and
an optional read-only environment and produces one output element.  It may
optionally carry a vectorised whole-block form that the partition runtime
uses for throughput; the per-element form remains the semantic definition
and the block form must agree with it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

from .grid import (
    Grid,
    GridError,
    Neighborhood,
    indexed_neighborhood_at,
    neighborhood_at,
)


class StencilError(RuntimeError):
    """Elemental-function failure, tagged with the offending element."""

    def __init__(self, index, cause, partition: Optional[int] = None):
        self.index = tuple(index) if index is not None else None
        self.partition = partition
        where = f"index {self.index}" if self.index is not None else "block kernel"
        if partition is not None:
            where += f" (partition {partition})"
        super().__init__(f"elemental function failed at {where}: {cause!r}")


@dataclass(frozen=True)
class ElementalFn:
    """Stencil kernel: a per-element function plus its declared radius.

    point        callable (Neighborhood, env) -> value
    k            window radius; the window spans (2k+1)^n entries
    block        optional vectorised form used by the partition runtime:
                 callable (block, env_block, info) -> ndarray of outputs
                 for the owned rows, where block is the owned region plus
                 k rows/cols of context on every side
    pad_value    value used to fill out-of-range context slots when a
                 block is assembled ("edge" replicates the border instead)
    """

    point: Callable[[Neighborhood, Any], Any]
    k: int
    block: Optional[Callable] = None
    pad_mode: str = "constant"
    pad_value: Any = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"radius must be >= 0, got {self.k}")
        if self.pad_mode not in ("constant", "edge"):
            raise ValueError(f"unknown pad mode {self.pad_mode!r}")

    def __call__(self, nb: Neighborhood, env: Any = None) -> Any:
        return self.point(nb, env)


def _point_fn(f) -> Callable:
    return f.point if isinstance(f, ElementalFn) else f


def _radius(f, k: Optional[int]) -> int:
    if isinstance(f, ElementalFn):
        if k is not None and k != f.k:
            raise ValueError(f"explicit radius {k} disagrees with kernel radius {f.k}")
        return f.k
    if k is None:
        raise ValueError("radius required for a bare callable")
    return k


@dataclass(frozen=True)
class Combinator:
    """Associative combiner with an explicit identity element.

    fn           callable (acc, x) -> acc; must be associative
    identity     the identity of fn; empty reductions return it
    on_array     optional whole-array form (ndarray -> scalar) used on the
                 vectorised path; must agree with folding fn
    """

    fn: Callable[[Any, Any], Any]
    identity: Any
    on_array: Optional[Callable] = None

    def __call__(self, a: Any, b: Any) -> Any:
        return self.fn(a, b)

    def fold(self, values) -> Any:
        acc = self.identity
        f = self.fn
        for v in values:
            acc = f(acc, v)
        return acc


@dataclass(frozen=True)
class Delta:
    """Per-element change measure for convergence loops.

    fn           callable (new, old) -> measure
    on_arrays    optional vectorised form (new_block, old_block) -> ndarray
    """

    fn: Callable[[Any, Any], Any]
    on_arrays: Optional[Callable] = None

    def __call__(self, new: Any, old: Any) -> Any:
        return self.fn(new, old)


def _check_env(env: Any, dims) -> None:
    grids = ()
    if env is None:
        return
    if isinstance(env, Grid):
        grids = (env,)
    elif isinstance(env, tuple):
        grids = tuple(g for g in env if isinstance(g, Grid))
    for g in grids:
        if g.dims != tuple(dims):
            raise GridError(f"env dims {g.dims} do not match grid dims {tuple(dims)}")


def apply_to_all(f: Callable[[Any], Any], a: Grid) -> Grid:
    """Elementwise map into a fresh grid; the input is untouched."""
    return Grid(a.dims, [f(v) for v in a.data])


def reduce_all(op: Combinator, a: Grid) -> Any:
    """Left fold of op over the grid in row-major order, seeded with the
    identity.  The combinator only needs associativity; this fixed order is
    the reference result that partitioned reductions must reproduce."""
    return op.fold(a.data)


# Aliases under the conventional names.
def map_pattern(f: Callable[[Any], Any], a: Grid) -> Grid:
    """Alias of apply_to_all."""
    return apply_to_all(f, a)


def reduce_pattern(op: Combinator, a: Grid) -> Any:
    """Alias of reduce_all."""
    return reduce_all(op, a)


def stencil_apply(f, k: Optional[int], a: Grid, env: Any = None) -> Grid:
    """Apply an elemental function over every radius-k window of a.

    Returns a fresh grid; out-of-range window slots are ABSENT.  A failure
    inside f aborts the whole apply and reports the element index.
    """
    k = _radius(f, k)
    fn = _point_fn(f)
    _check_env(env, a.dims)
    out = []
    for idx in a.indices():
        nb = neighborhood_at(a, idx, k)
        try:
            out.append(fn(nb, env))
        except Exception as e:
            raise StencilError(idx, e) from e
    return Grid(a.dims, out)


def stencil_apply_indexed(f, k: Optional[int], a: Grid, env: Any = None) -> Grid:
    """stencil_apply over windows of (value, index) pairs."""
    k = _radius(f, k)
    fn = _point_fn(f)
    _check_env(env, a.dims)
    out = []
    for idx in a.indices():
        nb = indexed_neighborhood_at(a, idx, k)
        try:
            out.append(fn(nb, env))
        except Exception as e:
            raise StencilError(idx, e) from e
    return Grid(a.dims, out)


def sum_combinator(identity: Any = 0) -> Combinator:
    """Addition with an explicit identity, vectorised via numpy sum."""
    import numpy as np

    def on_array(arr):
        return np.sum(arr).item()

    return Combinator(lambda a, b: a + b, identity, on_array=on_array)


def max_combinator(identity: Any) -> Combinator:
    import numpy as np

    def on_array(arr):
        return np.max(arr).item() if arr.size else identity

    return Combinator(lambda a, b: a if b < a else b, identity, on_array=on_array)
