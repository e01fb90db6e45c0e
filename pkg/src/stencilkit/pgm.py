"""Reading and writing portable graymaps (P2 ascii, P5 binary).

Only maxval <= 255 is supported, one byte per sample in P5.  Parse errors
carry the byte offset where the reader gave up, because "bad header" on a
multi-megabyte capture file is not actionable.
"""

from __future__ import annotations

import os
from typing import Union

from .grid import Grid, GridError


class PgmError(GridError):
    """Malformed PGM input; offset is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class _Scanner:
    """Whitespace/comment-aware token reader over raw PGM bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.start = 0  # offset of the most recent token

    def skip_separators(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            b = data[self.pos]
            if b in b" \t\r\n\x0b\x0c":
                self.pos += 1
            elif b == ord("#"):
                while self.pos < n and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def token(self, what: str) -> bytes:
        self.skip_separators()
        if self.pos >= len(self.data):
            raise PgmError(f"unexpected end of file reading {what}", self.pos)
        self.start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos] not in b" \t\r\n\x0b\x0c#":
            self.pos += 1
        return data[self.start : self.pos]

    def integer(self, what: str) -> int:
        tok = self.token(what)
        try:
            return int(tok)
        except ValueError:
            raise PgmError(f"expected integer for {what}, got {tok!r}",
                           self.start) from None


def read_pgm(path: Union[str, os.PathLike]) -> Grid:
    """Load a P2 or P5 graymap as a 2D grid of ints in [0, maxval]."""
    with open(path, "rb") as fh:
        data = fh.read()
    sc = _Scanner(data)
    magic = sc.token("magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"not a PGM file, magic {magic!r}", 0)
    width = sc.integer("width")
    height = sc.integer("height")
    maxval = sc.integer("maxval")
    if width <= 0 or height <= 0:
        raise PgmError(f"bad dimensions {width}x{height}", sc.pos)
    if not 0 < maxval <= 255:
        raise PgmError(f"unsupported maxval {maxval}", sc.pos)
    count = width * height

    if magic == b"P2":
        pixels = []
        for _ in range(count):
            v = sc.integer("pixel value")
            if not 0 <= v <= maxval:
                raise PgmError(f"pixel value {v} exceeds maxval {maxval}",
                               sc.start)
            pixels.append(v)
        return Grid((height, width), pixels)

    # P5: exactly one whitespace byte after maxval, then raw samples
    if sc.pos >= len(data) or data[sc.pos] not in b" \t\r\n":
        raise PgmError("missing whitespace after maxval", sc.pos)
    start = sc.pos + 1
    end = start + count
    if len(data) < end:
        raise PgmError(
            f"raster truncated: expected {count} bytes, found {len(data) - start}",
            len(data),
        )
    raster = data[start:end]
    for i, v in enumerate(raster):
        if v > maxval:
            raise PgmError(f"pixel value {v} exceeds maxval {maxval}", start + i)
    return Grid((height, width), list(raster))


def write_pgm(path: Union[str, os.PathLike], img: Grid, *,
              binary: bool = True, maxval: int = 255) -> None:
    """Write a 2D grid of ints in [0, maxval] as P5 (or P2 when binary=False)."""
    if img.ndim != 2:
        raise GridError("PGM output expects a 2D grid")
    if not 0 < maxval <= 255:
        raise GridError(f"unsupported maxval {maxval}")
    rows, cols = img.dims
    vals = []
    for v in img.data:
        iv = int(v)
        if iv != v or not 0 <= iv <= maxval:
            raise GridError(f"pixel value {v!r} not an integer in [0, {maxval}]")
        vals.append(iv)
    if binary:
        header = f"P5\n{cols} {rows}\n{maxval}\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(bytes(vals))
    else:
        lines = [f"P2\n{cols} {rows}\n{maxval}\n"]
        for r in range(rows):
            lines.append(" ".join(str(v) for v in vals[r * cols : (r + 1) * cols]))
            lines.append("\n")
        with open(path, "w", encoding="ascii") as fh:
            fh.write("".join(lines))
