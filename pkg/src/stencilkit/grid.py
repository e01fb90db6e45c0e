"""Dense 1D/2D grids and halo-aware window extraction.

A Grid is a flat row-major sequence of elements plus its shape.  Windows
taken near a border contain the distinguished ABSENT marker for slots that
fall outside the grid, so element kernels can tell a real border apart from
any legitimate value.  ABSENT is never a number; kernels decide what it
means (dead cell, Dirichlet zero, replicate, skip).
"""

from __future__ import annotations

from typing import Any, Iterator, Sequence


class GridError(ValueError):
    """Raised for invalid grid construction or out-of-contract access."""


class _AbsentType:
    """Singleton marker for out-of-range window slots."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_AbsentType, ())


ABSENT = _AbsentType()


def is_absent(value: Any) -> bool:
    return value is ABSENT


class Grid:
    """Dense rectangular grid of rank 1 or 2, stored row-major.

    Elements may be any copyable value; numeric uses are the common case
    but nothing here assumes numbers.
    """

    __slots__ = ("dims", "data")

    def __init__(self, dims: Sequence[int], data: Sequence[Any]):
        dims = tuple(int(d) for d in dims)
        if len(dims) not in (1, 2):
            raise GridError(f"grid rank must be 1 or 2, got {len(dims)}")
        for d in dims:
            if d <= 0:
                raise GridError(f"grid dims must be positive, got {dims}")
        data = list(data)
        size = 1
        for d in dims:
            size *= d
        if len(data) != size:
            raise GridError(
                f"data length {len(data)} does not match dims {dims} (expected {size})"
            )
        self.dims = dims
        self.data = data

    # -- constructors ---------------------------------------------------

    @classmethod
    def filled(cls, dims: Sequence[int], fill: Any) -> "Grid":
        dims = tuple(int(d) for d in dims)
        if len(dims) not in (1, 2) or any(d <= 0 for d in dims):
            raise GridError(f"bad dims {dims}")
        size = 1
        for d in dims:
            size *= d
        return cls(dims, [fill] * size)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]]) -> "Grid":
        rows = [list(r) for r in rows]
        if not rows:
            raise GridError("no rows")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise GridError("ragged rows")
        flat: list[Any] = []
        for r in rows:
            flat.extend(r)
        return cls((len(rows), width), flat)

    @classmethod
    def from_array(cls, arr) -> "Grid":
        import numpy as np

        a = np.asarray(arr)
        if a.ndim not in (1, 2):
            raise GridError(f"array rank must be 1 or 2, got {a.ndim}")
        return cls(a.shape, a.ravel().tolist())

    # -- properties -----------------------------------------------------

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    # -- access ---------------------------------------------------------

    def at(self, *index: int) -> Any:
        """Bounds-checked element read; raises GridError outside the grid."""
        if len(index) != len(self.dims):
            raise GridError(f"index arity {len(index)} vs rank {len(self.dims)}")
        for i, d in zip(index, self.dims):
            if not 0 <= i < d:
                raise GridError(f"index {index} out of range for dims {self.dims}")
        if len(index) == 1:
            return self.data[index[0]]
        return self.data[index[0] * self.dims[1] + index[1]]

    def __getitem__(self, index) -> Any:
        if isinstance(index, tuple):
            return self.at(*index)
        return self.at(index)

    def in_range(self, *index: int) -> bool:
        if len(index) != len(self.dims):
            return False
        return all(0 <= i < d for i, d in zip(index, self.dims))

    def indices(self) -> Iterator[tuple[int, ...]]:
        """Row-major iteration over all index tuples."""
        if len(self.dims) == 1:
            for i in range(self.dims[0]):
                yield (i,)
        else:
            d1, d2 = self.dims
            for i in range(d1):
                for j in range(d2):
                    yield (i, j)

    def to_rows(self) -> list:
        if len(self.dims) == 1:
            return list(self.data)
        d1, d2 = self.dims
        return [self.data[i * d2 : (i + 1) * d2] for i in range(d1)]

    def to_array(self, dtype=None):
        import numpy as np

        a = np.asarray(self.data, dtype=dtype)
        return a.reshape(self.dims)

    def copy(self) -> "Grid":
        return Grid(self.dims, list(self.data))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.dims == other.dims and self.data == other.data

    def __repr__(self) -> str:
        return f"Grid(dims={self.dims}, data={self.data!r})"


def grid_new(dims: Sequence[int], fill: Any) -> Grid:
    """Allocate a grid of the given shape with every element set to fill."""
    return Grid.filled(dims, fill)


def grid_get_padded(g: Grid, index: Sequence[int]) -> Any:
    """Read an element, returning ABSENT for any out-of-range index.

    The index arity must still match the grid rank; only the range check
    is relaxed.
    """
    index = tuple(index)
    if len(index) != g.ndim:
        raise GridError(f"index arity {len(index)} vs rank {g.ndim}")
    for i, d in zip(index, g.dims):
        if not 0 <= i < d:
            return ABSENT
    if g.ndim == 1:
        return g.data[index[0]]
    return g.data[index[0] * g.dims[1] + index[1]]


class Neighborhood:
    """A (2k+1)^n window of values centred on one grid element.

    Entries are stored row-major; out-of-range slots hold ABSENT.  Offsets
    passed to ``at`` are relative to the centre and range over [-k, k].
    """

    __slots__ = ("k", "center_index", "entries")

    def __init__(self, k: int, center_index: tuple[int, ...], entries: tuple):
        self.k = k
        self.center_index = center_index
        self.entries = entries

    @property
    def center(self) -> Any:
        k, w = self.k, 2 * self.k + 1
        if len(self.center_index) == 1:
            return self.entries[k]
        return self.entries[k * w + k]

    def at(self, *delta: int) -> Any:
        """Entry at an offset from the centre; ABSENT outside the grid."""
        k, w = self.k, 2 * self.k + 1
        if len(delta) == 1:
            return self.entries[k + delta[0]]
        return self.entries[(k + delta[0]) * w + (k + delta[1])]

    def values(self) -> list:
        """All in-range entries, row-major."""
        return [v for v in self.entries if v is not ABSENT]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"Neighborhood(k={self.k}, center={self.center_index})"


class IndexedNeighborhood(Neighborhood):
    """Window whose in-range entries are (value, index) pairs.

    The stored index is the global index of the entry, so kernels can
    consult aligned environment grids for any neighbour.
    """

    __slots__ = ()

    def pairs(self) -> list:
        return [p for p in self.entries if p is not ABSENT]

    def values(self) -> list:
        return [p[0] for p in self.entries if p is not ABSENT]


def _check_center(g: Grid, center: Sequence[int], k: int) -> tuple[int, ...]:
    if k < 0:
        raise GridError(f"window radius must be >= 0, got {k}")
    center = tuple(center)
    if len(center) != g.ndim:
        raise GridError(f"center arity {len(center)} vs rank {g.ndim}")
    if not g.in_range(*center):
        raise GridError(f"center {center} out of range for dims {g.dims}")
    return center


def neighborhood_at(g: Grid, center: Sequence[int], k: int) -> Neighborhood:
    """Extract the radius-k window around center, ABSENT outside the grid."""
    center = _check_center(g, center, k)
    w = 2 * k + 1
    data = g.data
    if g.ndim == 1:
        (i,) = center
        d1 = g.dims[0]
        lo = i - k
        entries = tuple(
            data[lo + a] if 0 <= lo + a < d1 else ABSENT for a in range(w)
        )
        return Neighborhood(k, center, entries)
    i, j = center
    d1, d2 = g.dims
    out = []
    for a in range(w):
        gi = i - k + a
        if gi < 0 or gi >= d1:
            out.extend([ABSENT] * w)
            continue
        row0 = gi * d2
        for b in range(w):
            gj = j - k + b
            out.append(data[row0 + gj] if 0 <= gj < d2 else ABSENT)
    return Neighborhood(k, center, tuple(out))


def indexed_neighborhood_at(g: Grid, center: Sequence[int], k: int) -> IndexedNeighborhood:
    """Like neighborhood_at, but in-range entries are (value, index) pairs."""
    center = _check_center(g, center, k)
    w = 2 * k + 1
    data = g.data
    if g.ndim == 1:
        (i,) = center
        d1 = g.dims[0]
        lo = i - k
        entries = tuple(
            (data[lo + a], (lo + a,)) if 0 <= lo + a < d1 else ABSENT
            for a in range(w)
        )
        return IndexedNeighborhood(k, center, entries)
    i, j = center
    d1, d2 = g.dims
    out = []
    for a in range(w):
        gi = i - k + a
        if gi < 0 or gi >= d1:
            out.extend([ABSENT] * w)
            continue
        row0 = gi * d2
        for b in range(w):
            gj = j - k + b
            out.append((data[row0 + gj], (gi, gj)) if 0 <= gj < d2 else ABSENT)
    return IndexedNeighborhood(k, center, tuple(out))
