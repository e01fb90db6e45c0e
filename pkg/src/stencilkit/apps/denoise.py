"""Two-phase impulse-noise removal for 8-bit images.

Phase one marks suspect pixels with an adaptive median test: the window
grows from 3x3 until its median separates from its extremes, and a pixel
sitting on an extreme is flagged.  Phase two restores only the flagged
pixels by minimising a local edge-preserving functional over [0, 255],
iterating until the mean change per flagged pixel drops below tolerance.
Clean pixels are never touched, which is the property that makes the
detector worth running first.

The video entry point chains both phases behind a reader and writer:

    pipeline(read, detect, ordered_farm(restore, W), write)

with the restore farm replicated W ways and each replica owning a warm
worker group, so frames stream through while individual restorations can
also be split across partitions (1:n deployment).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from ..grid import ABSENT, Grid, GridError
from ..loop import Condition, LoopReport
from ..partition import DeploymentMode, WorkerGroup, parallel_loop
from ..patterns import Combinator, Delta, ElementalFn
from ..streams import Stage, StreamReport, ordered_farm, pipeline, run_stream

_RING = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))

# Ternary search on [0, 255]: fixed step count bringing the interval
# below 0.25; both the scalar and the vector route run exactly this many
# steps so they agree bit for bit.
_SEARCH_LO = 0.0
_SEARCH_HI = 255.0
_SEARCH_PREC = 0.25
_SEARCH_STEPS = math.ceil(
    math.log((_SEARCH_HI - _SEARCH_LO) / _SEARCH_PREC) / math.log(1.5)
)


@dataclass(frozen=True)
class RestoreConfig:
    """Knobs for both phases.

    amf_wmax     largest (odd) detection window; 7 keeps dense noise
                 detectable without smearing detail
    phi_eps      smoothing inside phi(t) = sqrt(t*t + phi_eps)
    beta         overall weight of the functional; scales F without
                 moving its minimiser
    tol          stop when mean absolute change per flagged pixel is
                 below this; 0.02 matches the search precision, tighter
                 values stall against the quantised argmin
    """

    amf_wmax: int = 7
    phi_eps: float = 1e-2
    beta: float = 2.0
    tol: float = 0.02
    max_iterations: int = 100

    def __post_init__(self):
        if self.amf_wmax < 3 or self.amf_wmax % 2 == 0:
            raise GridError(f"amf_wmax must be odd and >= 3, got {self.amf_wmax}")
        if self.phi_eps <= 0 or self.beta <= 0 or self.tol <= 0:
            raise GridError("phi_eps, beta and tol must all be positive")


# ---------------------------------------------------------------------------
# phase one: adaptive median detection


def detect_kernel(wmax: int = 7) -> ElementalFn:
    """Noise classifier over (value, index) windows of radius wmax//2.

    Output is 1 for a pixel judged to be an impulse, else 0.
    """
    if wmax < 3 or wmax % 2 == 0:
        raise GridError(f"wmax must be odd and >= 3, got {wmax}")
    kmax = wmax // 2

    def point(nb, env) -> int:
        z = nb.center[0]
        med = z
        for w in range(3, wmax + 1, 2):
            r = w // 2
            vals = []
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    p = nb.at(di, dj)
                    if p is not ABSENT:
                        vals.append(p[0])
            mn, mx = min(vals), max(vals)
            med = statistics.median(vals)
            if mn < med < mx:
                return 1 if (z == mn or z == mx) else 0
        return 0 if z == med else 1

    def block(blk, env_block, info):
        k = info.k
        rows, cols = info.rows, info.cols
        work = np.where(info.valid, blk.astype(np.float64), np.nan)
        z = blk[k : k + rows, k : k + cols].astype(np.float64)
        out = np.zeros((rows, cols), dtype=blk.dtype)
        decided = np.zeros((rows, cols), dtype=bool)
        med = z
        for w in range(3, wmax + 1, 2):
            r = w // 2
            stack = np.stack(
                [
                    work[k + di : k + di + rows, k + dj : k + dj + cols]
                    for di in range(-r, r + 1)
                    for dj in range(-r, r + 1)
                ]
            )
            srt = np.sort(stack, axis=0)  # NaNs sort last
            cnt = np.sum(~np.isnan(stack), axis=0)
            mn = srt[0]
            mx = np.take_along_axis(srt, (cnt - 1)[None], axis=0)[0]
            lo = np.take_along_axis(srt, ((cnt - 1) // 2)[None], axis=0)[0]
            hi = np.take_along_axis(srt, (cnt // 2)[None], axis=0)[0]
            med = 0.5 * (lo + hi)
            ok = (mn < med) & (med < mx) & ~decided
            noisy = (z == mn) | (z == mx)
            out[ok] = noisy[ok]
            decided |= ok
        rest = ~decided
        out[rest] = (z != med)[rest]
        return out

    return ElementalFn(point=point, k=kmax, block=block,
                       pad_mode="constant", pad_value=0)


def _mask_sum() -> Combinator:
    return Combinator(lambda a, b: a + b, 0, on_array=lambda arr: int(np.sum(arr)))


def amf_detect(img: Grid, wmax: int = 7, *, partitions: int = 1,
               mode=DeploymentMode.ONE_TO_N,
               group: Optional[WorkerGroup] = None) -> Grid:
    """Adaptive-median noise map: 1 where a pixel looks like an impulse."""
    if img.ndim != 2:
        raise GridError("detection expects a 2D image")
    from ..loop import stop_after

    if partitions == 1:
        mode = DeploymentMode.ONE_TO_ONE
    out, _ = parallel_loop(mode, partitions, wmax // 2, detect_kernel(wmax),
                           _mask_sum(), stop_after(1), img, group=group)
    return out


# ---------------------------------------------------------------------------
# phase two: variational restoration of flagged pixels


def restore_kernel(cfg: RestoreConfig) -> ElementalFn:
    """Restoration step: flagged pixels move to the minimiser of

        F(u) = beta * sum over in-range neighbours m of
                   2*phi(u - y_m)   if m is clean
                   phi(u - u_m)     if m is flagged

    with phi(t) = sqrt(t*t + phi_eps); clean pixels pass through
    unchanged.  The env grid is the noise map, consulted per neighbour
    through the window's stored indices.
    """
    eps = cfg.phi_eps
    beta = cfg.beta

    def point(nb, env):
        z, (i, j) = nb.center
        if not env.at(i, j):
            return z
        terms = []
        for di, dj in _RING:
            p = nb.at(di, dj)
            if p is ABSENT:
                continue
            v, (ni, nj) = p
            weight = 1.0 if env.at(ni, nj) else 2.0
            terms.append((weight, float(v)))

        def F(u):
            s = 0.0
            for w, v in terms:
                t = u - v
                s = s + w * math.sqrt(t * t + eps)
            return beta * s

        lo, hi = _SEARCH_LO, _SEARCH_HI
        for _ in range(_SEARCH_STEPS):
            third = (hi - lo) / 3.0
            m1 = lo + third
            m2 = hi - third
            if F(m1) <= F(m2):
                hi = m2
            else:
                lo = m1
        return 0.5 * (lo + hi)

    def block(blk, env_block, info):
        c = blk[1:-1, 1:-1]
        out = c.copy()
        noise_c = env_block[1:-1, 1:-1]
        flagged = noise_c == 1
        if not flagged.any():
            return out
        idx = np.nonzero(flagged)
        h, w_ = blk.shape
        weights = []
        values = []
        for di, dj in _RING:
            sl = np.s_[1 + di : h - 1 + di, 1 + dj : w_ - 1 + dj]
            v = blk[sl][idx].astype(np.float64)
            nz = env_block[sl][idx]
            m = info.valid[sl][idx]
            weight = np.where(nz == 1, 1.0, 2.0) * m
            weights.append(weight)
            values.append(v)

        def F(u):
            s = np.zeros_like(u)
            for weight, v in zip(weights, values):
                t = u - v
                s = s + weight * np.sqrt(t * t + eps)
            return beta * s

        lo = np.full(len(idx[0]), _SEARCH_LO)
        hi = np.full(len(idx[0]), _SEARCH_HI)
        for _ in range(_SEARCH_STEPS):
            third = (hi - lo) / 3.0
            m1 = lo + third
            m2 = hi - third
            take_left = F(m1) <= F(m2)
            hi = np.where(take_left, m2, hi)
            lo = np.where(take_left, lo, m1)
        out[idx] = 0.5 * (lo + hi)
        return out

    return ElementalFn(point=point, k=1, block=block,
                       pad_mode="constant", pad_value=0.0)


def _abs_change() -> Delta:
    return Delta(lambda new, old: abs(new - old),
                 on_arrays=lambda new, old: np.abs(new - old))


def _float_sum() -> Combinator:
    return Combinator(lambda a, b: a + b, 0.0,
                      on_array=lambda arr: float(np.sum(arr)))


def restore_regularize(img: Grid, noise: Grid, cfg: Optional[RestoreConfig] = None,
                       *, partitions: int = 1, mode=DeploymentMode.ONE_TO_N,
                       group: Optional[WorkerGroup] = None) -> tuple[Grid, LoopReport]:
    """Restore the flagged pixels of img in place of their noisy values.

    Returns a float-valued grid; unflagged pixels carry their input values
    exactly.  An empty noise map returns after a single iteration.
    """
    cfg = cfg or RestoreConfig()
    if img.ndim != 2:
        raise GridError("restoration expects a 2D image")
    if noise.dims != img.dims:
        raise GridError(f"noise map dims {noise.dims} do not match image {img.dims}")
    for v in noise.data:
        if v != 0 and v != 1:
            raise GridError(f"noise map must be 0/1, found {v!r}")
    work = Grid(img.dims, [float(v) for v in img.data])
    flagged = sum(noise.data)
    denom = max(flagged, 1)
    tol = cfg.tol
    cond = Condition(lambda value, it, state: value / denom < tol,
                     max_iterations=cfg.max_iterations)
    if partitions == 1:
        mode = DeploymentMode.ONE_TO_ONE
    return parallel_loop(mode, partitions, 1, restore_kernel(cfg), _float_sum(),
                         cond, work, env=noise, delta=_abs_change(),
                         indexed=True, group=group)


# ---------------------------------------------------------------------------
# noise injection and the video pipeline


def salt_pepper(img: Grid, level: float, seed: int = 42) -> tuple[Grid, Grid]:
    """Corrupt a fraction of pixels to 0 or 255; returns (noisy, mask)."""
    if not 0 <= level <= 1:
        raise GridError(f"noise level must be in [0, 1], got {level}")
    rng = np.random.default_rng(seed)
    a = img.to_array()
    hit = rng.random(a.shape) < level
    salt = rng.random(a.shape) < 0.5
    noisy = np.where(hit, np.where(salt, 255, 0), a)
    return Grid.from_array(noisy), Grid.from_array(hit.astype(np.int64))


def video_restore_pipeline(frames: Iterable, *, width: int = 1,
                           partitions: int = 1,
                           mode=DeploymentMode.ONE_TO_ONE,
                           cfg: Optional[RestoreConfig] = None,
                           writer: Optional[Callable] = None,
                           loader: Optional[Callable] = None,
                           mask_writer: Optional[Callable] = None) -> StreamReport:
    """Stream frames through detect and a W-wide ordered restore farm.

    mode 1:1 restores each frame on one partition (frame-level parallelism
    comes from the farm width); mode 1:n splits every frame across
    `partitions` workers, each farm replica keeping its own warm group.
    The writer sees restored frames in input order; mask_writer, when
    given, sees each frame's noise map in the same order.
    """
    mode = DeploymentMode.parse(mode)
    if mode is DeploymentMode.ONE_TO_N and partitions < 2:
        raise GridError("1:n deployment needs at least 2 partitions")
    eff = partitions if mode is DeploymentMode.ONE_TO_N else 1
    cfg = cfg or RestoreConfig()

    read = Stage(loader or (lambda f: f), name="read")

    def detect_fn(img: Grid):
        mask = amf_detect(img, wmax=cfg.amf_wmax)
        if mask_writer is not None:
            mask_writer(mask)
        return img, mask

    detect = Stage(detect_fn, name="detect")

    def make_restorer():
        grp = WorkerGroup(eff)

        class _Restorer:
            def __call__(self, pair):
                img, mask = pair
                out, _report = restore_regularize(
                    img, mask, cfg, partitions=eff,
                    mode=mode if eff > 1 else DeploymentMode.ONE_TO_ONE,
                    group=grp,
                )
                return out

            def close(self):
                grp.close()

        return _Restorer()

    restore = Stage(factory=make_restorer, name="restore")

    if writer is None:
        write = Stage(lambda g: g, name="write")
    else:
        def write_fn(g):
            writer(g)
            return g

        write = Stage(write_fn, name="write")

    top = pipeline(read, detect, ordered_farm(restore, width), write)
    return run_stream(frames, top, sink=lambda _item: None)
