"""Exhaustive integer-displacement block matching.

Slow, simple oracle backend: every patch tries every integer shift within
``search_radius`` and keeps the SSD minimum.  Ties resolve to the smallest
(dy, dx) shift because shifts are scanned in that order with strict
improvement.
"""

from __future__ import annotations

import numpy as np

from .dis import _patch_grid


def _patch_sums(values: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                patch: int) -> np.ndarray:
    """Sum of ``values`` over each patch window, via an integral image."""
    integral = np.zeros((values.shape[0] + 1, values.shape[1] + 1))
    integral[1:, 1:] = values.cumsum(axis=0).cumsum(axis=1)
    y0 = ys[:, None]
    x0 = xs[None, :]
    return (integral[y0 + patch, x0 + patch] - integral[y0, x0 + patch]
            - integral[y0 + patch, x0] + integral[y0, x0])


def block_match_pair(i0: np.ndarray, i1: np.ndarray, cfg) -> tuple[np.ndarray, np.ndarray]:
    h, w = i0.shape
    patch = min(cfg.patch_size, h, w)
    stride = min(cfg.patch_stride, patch)
    r = cfg.search_radius

    ys = _patch_grid(h, patch, stride)
    xs = _patch_grid(w, patch, stride)
    ny, nx = len(ys), len(xs)

    padded = np.pad(i1, r, mode="edge")
    best_cost = np.full((ny, nx), np.inf)
    best_dx = np.zeros((ny, nx))
    best_dy = np.zeros((ny, nx))
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = padded[r + dy:r + dy + h, r + dx:r + dx + w]
            diff = i0 - shifted
            cost = _patch_sums(diff * diff, ys, xs, patch)
            better = cost < best_cost
            best_cost[better] = cost[better]
            best_dx[better] = dx
            best_dy[better] = dy

    # Uniform overlap averaging onto the pixel grid.
    acc_w = np.zeros(h * w)
    acc_x = np.zeros(h * w)
    acc_y = np.zeros(h * w)
    cols = np.arange(patch)
    for iy, y0 in enumerate(ys):
        rows = (np.arange(y0, y0 + patch)[:, None] * w)
        for ix, x0 in enumerate(xs):
            idx = (rows + (x0 + cols)[None, :]).ravel()
            acc_w[idx] += 1.0
            acc_x[idx] += best_dx[iy, ix]
            acc_y[idx] += best_dy[iy, ix]
    acc_w[acc_w == 0] = 1.0
    return ((acc_x / acc_w).reshape(h, w).astype(np.float32),
            (acc_y / acc_w).reshape(h, w).astype(np.float32))
