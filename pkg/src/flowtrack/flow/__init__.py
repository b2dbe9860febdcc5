"""Dense frame-to-frame displacement estimation and sub-pixel sampling.

A FlowField stores the displacement from frame t to frame t+1 as two H x W
grids (dx, dy), so grid[y, x] answers "where does the pixel at (x, y) go".
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import TooShortError
from ..video import Point2D, VideoSequence
from .block import block_match_pair
from .dis import dis_pair

__all__ = [
    "FlowConfig",
    "FlowField",
    "FlowVolume",
    "compute_flow",
    "sample_flow",
    "auto_pyramid_levels",
]


@dataclass(frozen=True)
class FlowConfig:
    """Backend selection and estimator knobs.

    Defaults approximate a medium-effort inverse-search preset: 8 px patches
    on a 4 px stride, 12 gradient-descent iterations, smoothing refinement
    on.  ``pyramid_levels=None`` picks the depth automatically so the
    coarsest level stays at least ~16 px wide.
    """

    backend: str = "dis"
    patch_size: int = 8
    patch_stride: int = 4
    pyramid_levels: int | None = None
    gradient_descent_iters: int = 12
    refinement: bool = True
    search_radius: int = 8  # block_match only

    def __post_init__(self):
        if self.backend not in ("dis", "block_match"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.patch_stride > self.patch_size:
            raise ValueError("patch_stride must be <= patch_size")
        if self.pyramid_levels is not None and self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")


@dataclass(frozen=True)
class FlowField:
    """Displacement field from frame ``t`` to frame ``t + 1``."""

    t: int
    dx: np.ndarray
    dy: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        if self.dx.shape != self.dy.shape or self.dx.ndim != 2:
            raise ValueError("dx/dy must be matching 2-D grids")

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @property
    def width(self) -> int:
        return self.dx.shape[1]


@dataclass(frozen=True)
class FlowVolume:
    """T-1 consecutive flow fields for a T-frame sequence."""

    fields: list[FlowField]
    width: int
    height: int
    frame_count: int

    def __post_init__(self):
        if len(self.fields) != self.frame_count - 1:
            raise ValueError(
                f"expected {self.frame_count - 1} fields, got {len(self.fields)}"
            )

    def field(self, t: int) -> FlowField:
        return self.fields[t]


def auto_pyramid_levels(width: int, height: int) -> int:
    """Depth that keeps the coarsest pyramid level at least ~16 px."""
    side = min(width, height)
    if side < 32:
        return 1
    return max(1, min(6, int(math.floor(math.log2(side / 16)))))


def sample_flow(flow_field: FlowField, p: Point2D) -> tuple[float, float]:
    """Bilinear displacement lookup at a sub-pixel point.

    Coordinates outside the grid are clamped to the border first, so the
    function is total.
    """
    dx, dy = _sample_pair(flow_field.dx, flow_field.dy, p.x, p.y)
    return (dx, dy)


def _sample_pair(gx: np.ndarray, gy: np.ndarray, x: float, y: float):
    """Shared bilinear kernel; kept scalar because callers loop per frame."""
    h, w = gx.shape
    if x < 0.0:
        x = 0.0
    elif x > w - 1:
        x = float(w - 1)
    if y < 0.0:
        y = 0.0
    elif y > h - 1:
        y = float(h - 1)
    x0 = int(x)
    y0 = int(y)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    vx = (w00 * gx[y0, x0] + w10 * gx[y0, x1]
          + w01 * gx[y1, x0] + w11 * gx[y1, x1])
    vy = (w00 * gy[y0, x0] + w10 * gy[y0, x1]
          + w01 * gy[y1, x0] + w11 * gy[y1, x1])
    return float(vx), float(vy)


def _is_degenerate(a: np.ndarray, b: np.ndarray) -> bool:
    return float(a.max() - a.min()) < 1e-9 and float(b.max() - b.min()) < 1e-9


def compute_flow(video: VideoSequence, cfg: FlowConfig | None = None,
                 progress=None, workers: int | None = None) -> FlowVolume:
    """Estimate displacement fields for every consecutive frame pair.

    ``progress``, when given, is called as ``progress(done, total)`` after
    each completed pair.  Frame pairs are independent and computed in a
    thread pool; results are assembled in frame order regardless of
    completion order.
    """
    cfg = cfg or FlowConfig()
    if video.frame_count < 2:
        raise TooShortError("flow needs at least 2 frames")
    pair_fn = dis_pair if cfg.backend == "dis" else block_match_pair

    total = video.frame_count - 1
    done = 0

    def one(t: int) -> FlowField:
        i0 = video.pixels[t]
        i1 = video.pixels[t + 1]
        if _is_degenerate(i0, i1):
            zero = np.zeros(i0.shape, dtype=np.float32)
            return FlowField(t=t, dx=zero, dy=zero.copy(), degenerate=True)
        dx, dy = pair_fn(i0, i1, cfg)
        return FlowField(t=t, dx=dx, dy=dy)

    fields: list[FlowField] = [None] * total  # type: ignore[list-item]
    n_workers = workers or min(total, os.cpu_count() or 1)
    if n_workers <= 1:
        for t in range(total):
            fields[t] = one(t)
            done += 1
            if progress:
                progress(done, total)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for t, f in zip(range(total), pool.map(one, range(total))):
                fields[t] = f
                done += 1
                if progress:
                    progress(done, total)
    return FlowVolume(fields=fields, width=video.width, height=video.height,
                      frame_count=video.frame_count)
