"""Coarse-to-fine inverse-search patch flow.

Per pyramid level, each patch's displacement is refined with inverse-
compositional gradient steps against the target frame, the per-patch
displacements are densified by fit-error-weighted overlap averaging, and an
optional fixed-iteration Jacobi smoothing relaxes the dense field toward
its neighborhood mean while staying attached to the densified data.
"""

from __future__ import annotations

import cv2
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import map_coordinates

_JACOBI_ITERS = 5
_DATA_WEIGHT = 2.0
_EPS = 1e-8


def _patch_grid(size: int, patch: int, stride: int) -> np.ndarray:
    """Top-left patch offsets covering [0, size - patch], flush at the end."""
    pos = list(range(0, size - patch + 1, stride))
    if pos[-1] != size - patch:
        pos.append(size - patch)
    return np.asarray(pos, dtype=np.intp)


def _refine_level(i0: np.ndarray, i1: np.ndarray, init: np.ndarray,
                  patch: int, stride: int, iters: int) -> np.ndarray:
    """One pyramid level: patch inverse search + weighted densification.

    ``init`` is the (2, H, W) field upsampled from the coarser level; the
    return value has the same shape.
    """
    h, w = i0.shape
    if min(h, w) < patch:
        return init

    ys = _patch_grid(h, patch, stride)
    xs = _patch_grid(w, patch, stride)

    windows0 = sliding_window_view(i0, (patch, patch))
    templates = windows0[ys][:, xs].reshape(-1, patch, patch)
    n = templates.shape[0]

    gy_full, gx_full = np.gradient(i0)
    gx = sliding_window_view(gx_full, (patch, patch))[ys][:, xs].reshape(n, patch, patch)
    gy = sliding_window_view(gy_full, (patch, patch))[ys][:, xs].reshape(n, patch, patch)

    # 2x2 template Hessian per patch, inverted in closed form.
    a = (gx * gx).sum(axis=(1, 2)) + _EPS
    b = (gx * gy).sum(axis=(1, 2))
    c = (gy * gy).sum(axis=(1, 2)) + _EPS
    det = a * c - b * b

    # Absolute pixel coordinates of each patch's template window.
    base_x = (xs[None, :, None, None]
              + np.arange(patch)[None, None, None, :])
    base_y = (ys[:, None, None, None]
              + np.arange(patch)[None, None, :, None])
    px = np.broadcast_to(base_x, (len(ys), len(xs), patch, patch)).reshape(n, patch, patch)
    py = np.broadcast_to(base_y, (len(ys), len(xs), patch, patch)).reshape(n, patch, patch)

    # Initial displacement: the upsampled coarser flow at patch centers.
    cy = ys + (patch - 1) / 2.0
    cx = xs + (patch - 1) / 2.0
    cyy, cxx = np.meshgrid(cy, cx, indexing="ij")
    centers = [cyy.ravel(), cxx.ravel()]
    ux = map_coordinates(init[0], centers, order=1, mode="nearest")
    uy = map_coordinates(init[1], centers, order=1, mode="nearest")

    max_step = float(patch)
    residual = templates
    for _ in range(iters):
        sx = px + ux[:, None, None]
        sy = py + uy[:, None, None]
        warped = map_coordinates(i1, [sy.ravel(), sx.ravel()],
                                 order=1, mode="nearest").reshape(n, patch, patch)
        residual = warped - templates
        bx = (gx * residual).sum(axis=(1, 2))
        by = (gy * residual).sum(axis=(1, 2))
        dux = (c * bx - b * by) / det
        duy = (a * by - b * bx) / det
        np.clip(dux, -max_step, max_step, out=dux)
        np.clip(duy, -max_step, max_step, out=duy)
        ux = ux - dux
        uy = uy - duy

    weights = 1.0 / (1e-4 + (residual * residual).mean(axis=(1, 2)))

    flat_idx = (py * w + px).reshape(n, -1)
    wpix = np.repeat(weights, patch * patch)
    idx = flat_idx.ravel()
    acc_w = np.bincount(idx, weights=wpix, minlength=h * w)
    acc_x = np.bincount(idx, weights=wpix * np.repeat(ux, patch * patch),
                        minlength=h * w)
    acc_y = np.bincount(idx, weights=wpix * np.repeat(uy, patch * patch),
                        minlength=h * w)
    acc_w[acc_w == 0] = 1.0
    dense = np.stack([
        (acc_x / acc_w).reshape(h, w),
        (acc_y / acc_w).reshape(h, w),
    ])
    return dense


def _jacobi_smooth(flow: np.ndarray) -> np.ndarray:
    """Fixed-iteration Jacobi relaxation with data attachment to ``flow``."""
    data = flow
    out = flow.copy()
    for _ in range(_JACOBI_ITERS):
        padded = np.pad(out, ((0, 0), (1, 1), (1, 1)), mode="edge")
        neighbor_sum = (padded[:, :-2, 1:-1] + padded[:, 2:, 1:-1]
                        + padded[:, 1:-1, :-2] + padded[:, 1:-1, 2:])
        out = (_DATA_WEIGHT * data + neighbor_sum) / (_DATA_WEIGHT + 4.0)
    return out


def dis_pair(i0: np.ndarray, i1: np.ndarray, cfg) -> tuple[np.ndarray, np.ndarray]:
    """Dense displacement from ``i0`` to ``i1`` via coarse-to-fine inverse search."""
    from . import auto_pyramid_levels  # local import avoids a cycle

    h, w = i0.shape
    levels = cfg.pyramid_levels or auto_pyramid_levels(w, h)

    pyr0 = [np.ascontiguousarray(i0, dtype=np.float64)]
    pyr1 = [np.ascontiguousarray(i1, dtype=np.float64)]
    for _ in range(levels - 1):
        prev0, prev1 = pyr0[-1], pyr1[-1]
        nh, nw = max(2, prev0.shape[0] // 2), max(2, prev0.shape[1] // 2)
        pyr0.append(cv2.resize(prev0, (nw, nh), interpolation=cv2.INTER_AREA))
        pyr1.append(cv2.resize(prev1, (nw, nh), interpolation=cv2.INTER_AREA))

    flow = np.zeros((2,) + pyr0[-1].shape, dtype=np.float64)
    for lvl in range(levels - 1, -1, -1):
        lh, lw = pyr0[lvl].shape
        if flow.shape[1:] != (lh, lw):
            flow = np.stack([
                cv2.resize(flow[0], (lw, lh), interpolation=cv2.INTER_LINEAR),
                cv2.resize(flow[1], (lw, lh), interpolation=cv2.INTER_LINEAR),
            ]) * 2.0
        flow = _refine_level(pyr0[lvl], pyr1[lvl], flow,
                             cfg.patch_size, cfg.patch_stride,
                             cfg.gradient_descent_iters)
        if cfg.refinement:
            flow = _jacobi_smooth(flow)
    return flow[0].astype(np.float32), flow[1].astype(np.float32)
