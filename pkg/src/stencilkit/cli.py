"""Command line front end: run one of the bundled apps and report timings.

    stencilkit gol --n 128 --m 128 -p 4 --mode 1:n --csv out.csv
    stencilkit helmholtz --n 256 --m 256 --tol 1e-6
    stencilkit sobel --in lena.pgm --out edges.pgm
    stencilkit denoise --in noisy.pgm --out clean.pgm
    stencilkit denoise --frames 8 -w 4 --noise-level 0.1

Exit status: 0 on success, 1 when a run fails, 2 on usage errors.  The
reported wall time covers the pattern run only, never file IO or input
synthesis.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Optional

import numpy as np

from .apps import (
    GolConfig,
    HelmholtzConfig,
    RestoreConfig,
    amf_detect,
    game_of_life,
    helmholtz_solve,
    restore_regularize,
    salt_pepper,
    sobel_filter,
    video_restore_pipeline,
)
from .bench import BenchRow, RunSpec, emit_csv
from .grid import Grid, GridError
from .partition import DeploymentMode
from .patterns import StencilError
from .pgm import read_pgm, write_pgm
from .streams import StreamError


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-p", "--partitions", type=int, default=1,
                        help="partitions per run (default 1)")
    parser.add_argument("-w", "--width", type=int, default=1,
                        help="stream farm width (default 1)")
    parser.add_argument("--mode", choices=("1:1", "1:n"), default="1:1",
                        help="deployment: 1:1 whole-grid, 1:n split grid")
    parser.add_argument("--seed", type=int, default=42,
                        help="RNG seed for synthetic inputs (default 42)")
    parser.add_argument("--csv", metavar="PATH",
                        help="append a benchmark row to PATH")
    parser.add_argument("--max-iters", type=int, default=None,
                        help="iteration cap (app-specific default)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stencilkit",
        description="iterative stencil apps on partitioned grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gol", help="Game of Life on a random soup")
    _common(p)
    p.add_argument("--n", type=int, default=64, help="rows (default 64)")
    p.add_argument("--m", type=int, default=64, help="cols (default 64)")
    p.add_argument("--out", help="write the final board as PGM")
    p.set_defaults(func=_cmd_gol)

    p = sub.add_parser("helmholtz", help="Jacobi Helmholtz solve, unit forcing")
    _common(p)
    p.add_argument("--n", type=int, default=64, help="rows (default 64)")
    p.add_argument("--m", type=int, default=64, help="cols (default 64)")
    p.add_argument("--alpha", type=float, default=1.0,
                   help="Helmholtz coefficient (default 1.0)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="RMS step-size tolerance (default 1e-6)")
    p.set_defaults(func=_cmd_helmholtz)

    p = sub.add_parser("sobel", help="Sobel edge detection on a PGM image")
    _common(p)
    p.add_argument("--in", dest="infile", required=True, help="input PGM")
    p.add_argument("--out", help="write the edge map as PGM")
    p.set_defaults(func=_cmd_sobel)

    p = sub.add_parser("denoise", help="impulse-noise removal, image or frames")
    _common(p)
    p.add_argument("--in", dest="infile", help="input PGM (else synthetic)")
    p.add_argument("--out", help="write the restored image as PGM")
    p.add_argument("--n", type=int, default=64, help="synthetic rows (default 64)")
    p.add_argument("--m", type=int, default=64, help="synthetic cols (default 64)")
    p.add_argument("--frames", default=None,
                   help="stream a directory of PGM frames (or a count of "
                        "synthetic frames) instead of a single image")
    p.add_argument("--noise-map-out", metavar="DIR",
                   help="with --frames: write per-frame noise maps here")
    p.add_argument("--noise-level", type=float, default=None,
                   help="salt-and-pepper fraction to inject "
                        "(default 0.1 synthetic, 0 for --in)")
    p.add_argument("--tol", type=float, default=None,
                   help="restoration tolerance (default 0.02)")
    p.set_defaults(func=_cmd_denoise)

    return parser


def _mode(args) -> DeploymentMode:
    return DeploymentMode.parse(args.mode)


def _emit(args, input_id: str, report, wall_ms: float) -> None:
    if not args.csv:
        return
    spec = RunSpec(app=args.command, input_id=input_id,
                   partitions=args.partitions, width=args.width,
                   mode=args.mode, seed=args.seed)
    emit_csv([BenchRow.from_run(spec, report, wall_ms)], args.csv)


def _banner(args, input_id: str) -> None:
    print(f"{args.command} {input_id} p={args.partitions} w={args.width} "
          f"mode={args.mode} seed={args.seed}")


def _write_pgm_rounded(path: str, grid: Grid) -> None:
    a = np.clip(np.rint(grid.to_array(dtype=np.float64)), 0, 255)
    write_pgm(path, Grid.from_array(a.astype(np.int64)))


def _cmd_gol(args) -> int:
    rows, cols = args.n, args.m
    rng = np.random.default_rng(args.seed)
    soup = Grid.from_array((rng.random((rows, cols)) < 0.3).astype(np.int64))
    cfg = GolConfig(rows=rows, cols=cols, steps=args.max_iters or 100)
    input_id = f"soup-{rows}x{cols}"
    _banner(args, input_id)
    t0 = time.perf_counter()
    board, report = game_of_life(soup, config=cfg,
                                 partitions=args.partitions, mode=_mode(args))
    wall_ms = (time.perf_counter() - t0) * 1e3
    print(f"iterations={report.iterations} liveness={report.final_reduce} "
          f"wall_ms={wall_ms:.3f}")
    if args.out:
        scaled = Grid(board.dims, [255 * v for v in board.data])
        write_pgm(args.out, scaled)
    _emit(args, input_id, report, wall_ms)
    return 0


def _cmd_helmholtz(args) -> int:
    rows, cols = args.n, args.m
    cfg = HelmholtzConfig(rows=rows, cols=cols, alpha=args.alpha, tol=args.tol,
                          max_iterations=args.max_iters or 10_000)
    rhs = Grid.filled((rows, cols), 1.0)
    input_id = f"unit-{rows}x{cols}"
    _banner(args, input_id)
    t0 = time.perf_counter()
    _u, report = helmholtz_solve(cfg, rhs, partitions=args.partitions,
                                 mode=_mode(args))
    wall_ms = (time.perf_counter() - t0) * 1e3
    rms = (report.final_reduce / (rows * cols)) ** 0.5
    status = "exhausted" if report.exhausted else "converged"
    print(f"iterations={report.iterations} rms_step={rms:.3e} {status} "
          f"wall_ms={wall_ms:.3f}")
    _emit(args, input_id, report, wall_ms)
    return 0


def _cmd_sobel(args) -> int:
    img = read_pgm(args.infile)
    input_id = args.infile.rsplit("/", 1)[-1]
    _banner(args, input_id)
    t0 = time.perf_counter()
    edges, report = sobel_filter(img, partitions=args.partitions,
                                 mode=_mode(args), with_report=True)
    wall_ms = (time.perf_counter() - t0) * 1e3
    print(f"pixel_sum={report.final_reduce} wall_ms={wall_ms:.3f}")
    if args.out:
        write_pgm(args.out, edges)
    _emit(args, input_id, report, wall_ms)
    return 0


def _synthetic_frame(rows: int, cols: int, shift: int) -> Grid:
    r = np.arange(rows)[:, None]
    c = np.arange(cols)[None, :]
    a = ((r * 3 + c * 2 + shift * 5) % 256).astype(np.int64)
    return Grid.from_array(a)


def _frame_writer(directory: str):
    """Writer callable dumping numbered PGMs; call order is frame order."""
    os.makedirs(directory, exist_ok=True)
    counter = iter(range(10 ** 6))

    def write(grid: Grid) -> None:
        _write_pgm_rounded(os.path.join(directory, f"frame{next(counter):04d}.pgm"),
                           grid)

    return write


def _cmd_denoise(args) -> int:
    cfg = RestoreConfig(tol=args.tol, max_iterations=args.max_iters or 100) \
        if args.tol is not None else \
        RestoreConfig(max_iterations=args.max_iters or 100)
    mode = _mode(args)

    if args.frames is not None:
        if str(args.frames).isdigit():
            count = int(args.frames)
            if count < 1:
                raise GridError(f"--frames count must be >= 1, got {args.frames}")
            level = 0.1 if args.noise_level is None else args.noise_level
            frames = [salt_pepper(_synthetic_frame(args.n, args.m, i),
                                  level, seed=args.seed + i)[0]
                      for i in range(count)]
            input_id = f"frames{count}-{args.n}x{args.m}"
        else:
            paths = sorted(p for p in os.listdir(args.frames)
                           if p.endswith(".pgm"))
            if not paths:
                raise GridError(f"no .pgm frames in {args.frames!r}")
            frames = [read_pgm(os.path.join(args.frames, p)) for p in paths]
            input_id = os.path.basename(os.path.normpath(args.frames))
        writer = _frame_writer(args.out) if args.out else None
        mask_writer = (_frame_writer(args.noise_map_out)
                       if args.noise_map_out else None)
        _banner(args, input_id)
        t0 = time.perf_counter()
        report = video_restore_pipeline(frames, width=args.width,
                                        partitions=args.partitions, mode=mode,
                                        cfg=cfg, writer=writer,
                                        mask_writer=mask_writer)
        wall_ms = (time.perf_counter() - t0) * 1e3
        print(f"frames={report.items_out} failures={len(report.failures)} "
              f"wall_ms={wall_ms:.3f}")
        if args.csv:
            spec = RunSpec(app=args.command, input_id=input_id,
                           partitions=args.partitions, width=args.width,
                           mode=args.mode, seed=args.seed)
            row = BenchRow(app=spec.app, input_id=spec.input_id,
                           partitions=spec.partitions, width=spec.width,
                           mode=spec.mode.value, seed=spec.seed,
                           iterations=report.items_out, wall_ms=wall_ms,
                           fill_events=0, halo_elems=0, readback_events=0,
                           reduce_final=0.0)
            emit_csv([row], args.csv)
        return 1 if report.failures else 0

    if args.infile:
        img = read_pgm(args.infile)
        input_id = args.infile.rsplit("/", 1)[-1]
        level = 0.0 if args.noise_level is None else args.noise_level
    else:
        img = _synthetic_frame(args.n, args.m, 0)
        input_id = f"synthetic-{args.n}x{args.m}"
        level = 0.1 if args.noise_level is None else args.noise_level
    if level > 0:
        img, _mask = salt_pepper(img, level, seed=args.seed)
    _banner(args, input_id)
    t0 = time.perf_counter()
    mask = amf_detect(img, wmax=cfg.amf_wmax, partitions=args.partitions,
                      mode=mode)
    restored, report = restore_regularize(img, mask, cfg,
                                          partitions=args.partitions, mode=mode)
    wall_ms = (time.perf_counter() - t0) * 1e3
    flagged = sum(mask.data)
    status = "exhausted" if report.exhausted else "converged"
    print(f"flagged={flagged} iterations={report.iterations} {status} "
          f"wall_ms={wall_ms:.3f}")
    if args.out:
        _write_pgm_rounded(args.out, restored)
    _emit(args, input_id, report, wall_ms)
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.mode == "1:n" and args.partitions < 2:
        parser.error("mode 1:n needs --partitions >= 2")
    try:
        return args.func(args)
    except (GridError, StencilError, StreamError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
