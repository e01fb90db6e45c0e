"""Applications built on the stencil-reduce patterns."""

from .life import GolConfig, game_of_life, life_kernel, liveness_op
from .helmholtz import HelmholtzConfig, helmholtz_solve, helmholtz_kernel
from .sobel import sobel_filter, sobel_kernel
from .denoise import (
    RestoreConfig,
    amf_detect,
    detect_kernel,
    restore_kernel,
    restore_regularize,
    salt_pepper,
    video_restore_pipeline,
)

__all__ = [
    "GolConfig",
    "game_of_life",
    "life_kernel",
    "liveness_op",
    "HelmholtzConfig",
    "helmholtz_solve",
    "helmholtz_kernel",
    "sobel_filter",
    "sobel_kernel",
    "RestoreConfig",
    "amf_detect",
    "detect_kernel",
    "restore_kernel",
    "restore_regularize",
    "salt_pepper",
    "video_restore_pipeline",
]
