"""Iterative stencil-reduce patterns on dense grids.

The core abstraction is a loop that alternates a halo stencil sweep with
a global reduction and stops when a condition on the reduced value says
so.  Variants thread element indices into the windows, reduce the change
between successive sweeps instead of the new values, or carry explicit
loop state.  The same loop runs sequentially or split row-wise across a
worker group, and grids can also flow through bounded streaming
pipelines with ordered task farms.
"""

from .grid import (
    ABSENT,
    Grid,
    GridError,
    IndexedNeighborhood,
    Neighborhood,
    grid_get_padded,
    grid_new,
    indexed_neighborhood_at,
    is_absent,
    neighborhood_at,
)
from .ledger import CopyLedger
from .loop import (
    Condition,
    LoopReport,
    LoopState,
    loop_stencil_reduce,
    loop_stencil_reduce_d,
    loop_stencil_reduce_i,
    loop_stencil_reduce_s,
    stop_after,
)
from .partition import (
    DeploymentMode,
    PartitionSet,
    WorkerGroup,
    halo_exchange,
    parallel_loop,
    parallel_step,
    partition,
)
from .patterns import (
    Combinator,
    Delta,
    ElementalFn,
    StencilError,
    apply_to_all,
    map_pattern,
    max_combinator,
    reduce_all,
    reduce_pattern,
    stencil_apply,
    stencil_apply_indexed,
    sum_combinator,
)
from .streams import (
    OrderedFarm,
    Pipeline,
    Stage,
    StreamError,
    StreamReport,
    ordered_farm,
    pipeline,
    run_stream,
)

__version__ = "0.1.0"

__all__ = [
    "ABSENT",
    "Grid",
    "GridError",
    "IndexedNeighborhood",
    "Neighborhood",
    "grid_get_padded",
    "grid_new",
    "indexed_neighborhood_at",
    "is_absent",
    "neighborhood_at",
    "CopyLedger",
    "Condition",
    "LoopReport",
    "LoopState",
    "loop_stencil_reduce",
    "loop_stencil_reduce_d",
    "loop_stencil_reduce_i",
    "loop_stencil_reduce_s",
    "stop_after",
    "DeploymentMode",
    "PartitionSet",
    "WorkerGroup",
    "halo_exchange",
    "parallel_loop",
    "parallel_step",
    "partition",
    "Combinator",
    "Delta",
    "ElementalFn",
    "StencilError",
    "apply_to_all",
    "map_pattern",
    "max_combinator",
    "reduce_all",
    "reduce_pattern",
    "stencil_apply",
    "stencil_apply_indexed",
    "sum_combinator",
    "OrderedFarm",
    "Pipeline",
    "Stage",
    "StreamError",
    "StreamReport",
    "ordered_farm",
    "pipeline",
    "run_stream",
    "__version__",
]
