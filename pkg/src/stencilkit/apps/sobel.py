"""Sobel edge detection over 8-bit images.

One stencil pass, no iteration: gradient magnitude of the two 3x3 Sobel
convolutions, rounded and clamped back into [0, 255].  Window slots that
fall off the image read as the centre pixel, so borders see a locally
flat continuation of themselves.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from ..grid import ABSENT, Grid, GridError
from ..loop import stop_after
from ..partition import DeploymentMode, WorkerGroup, parallel_loop
from ..patterns import Combinator, ElementalFn

# Gx weights by window offset; Gy is the transpose.
_GX = (
    ((-1, -1), -1), ((-1, 1), 1),
    ((0, -1), -2), ((0, 1), 2),
    ((1, -1), -1), ((1, 1), 1),
)
_GY = (
    ((-1, -1), -1), ((-1, 0), -2), ((-1, 1), -1),
    ((1, -1), 1), ((1, 0), 2), ((1, 1), 1),
)


def _sobel_point(nb, env) -> int:
    c = nb.center
    gx = 0
    for (di, dj), w in _GX:
        v = nb.at(di, dj)
        gx += w * (c if v is ABSENT else v)
    gy = 0
    for (di, dj), w in _GY:
        v = nb.at(di, dj)
        gy += w * (c if v is ABSENT else v)
    mag = round(math.sqrt(gx * gx + gy * gy))
    return 0 if mag < 0 else (255 if mag > 255 else mag)


def _sobel_block(block, env_block, info):
    c = block[1:-1, 1:-1]
    valid = info.valid

    def nb(di, dj):
        v = block[1 + di : block.shape[0] - 1 + di, 1 + dj : block.shape[1] - 1 + dj]
        m = valid[1 + di : valid.shape[0] - 1 + di, 1 + dj : valid.shape[1] - 1 + dj]
        return np.where(m, v, c)

    gx = (
        -nb(-1, -1) + nb(-1, 1)
        - 2 * nb(0, -1) + 2 * nb(0, 1)
        - nb(1, -1) + nb(1, 1)
    )
    gy = (
        -nb(-1, -1) - 2 * nb(-1, 0) - nb(-1, 1)
        + nb(1, -1) + 2 * nb(1, 0) + nb(1, 1)
    )
    mag = np.rint(np.sqrt(gx * gx + gy * gy))
    return np.clip(mag, 0, 255).astype(block.dtype)


sobel_kernel = ElementalFn(point=_sobel_point, k=1, block=_sobel_block,
                           pad_mode="constant", pad_value=0)


def _pixel_sum() -> Combinator:
    return Combinator(lambda a, b: a + b, 0, on_array=lambda arr: int(np.sum(arr)))


def sobel_filter(img: Grid, *, partitions: int = 1,
                 mode=DeploymentMode.ONE_TO_N,
                 group: Optional[WorkerGroup] = None, with_report: bool = False):
    """Edge-magnitude image of an 8-bit grayscale grid.

    Returns the edge map, or (edge map, report) when with_report is set;
    the report's final reduce is the sum of all output magnitudes.
    """
    if img.ndim != 2:
        raise GridError("sobel expects a 2D image")
    for v in img.data:
        if not (0 <= v <= 255):
            raise GridError(f"pixel {v!r} outside [0, 255]")
    if partitions == 1:
        mode = DeploymentMode.ONE_TO_ONE
    out, report = parallel_loop(mode, partitions, 1, sobel_kernel, _pixel_sum(),
                                stop_after(1), img, group=group)
    return (out, report) if with_report else out
