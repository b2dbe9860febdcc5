"""Corridor-constrained dynamic-programming trajectory baseline.

Candidate positions for each intermediate frame form an integer lattice
around the straight line joining the two anchors; the minimum-cost path is
found frame by frame, where moving from u at frame t to v at frame t+1
costs the Euclidean mismatch between the taken step and the flow sampled
at u.  Cost ties resolve to the lexicographically smallest path, with
positions ordered as (x, y) tuples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadOrderError, SameFrameError
from .flow import FlowVolume, _sample_pair
from .track import Anchor


@dataclass(frozen=True)
class CorridorConfig:
    # Radius covers the largest scoring threshold; step 1 keeps the full
    # integer lattice.  Both are tunable.
    corridor_radius: float = 16.0
    lattice_step: int = 1


def _lattice(center: np.ndarray, radius: float, step: int) -> np.ndarray:
    """Integer positions within ``radius`` of ``center``, sorted by (x, y)."""
    cx, cy = center
    x_lo = int(np.floor(cx - radius))
    x_hi = int(np.ceil(cx + radius))
    y_lo = int(np.floor(cy - radius))
    y_hi = int(np.ceil(cy + radius))
    xs = np.arange(x_lo, x_hi + 1, step)
    ys = np.arange(y_lo, y_hi + 1, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()]).astype(float)
    keep = ((pts[:, 0] - cx) ** 2 + (pts[:, 1] - cy) ** 2) <= radius ** 2
    pts = pts[keep]
    order = np.lexsort((pts[:, 1], pts[:, 0]))  # primary x, secondary y
    return pts[order]


def _snap(pos: np.ndarray, step: int) -> np.ndarray:
    return np.round(pos / step) * step


def interpolate_corridor_dp(flow: FlowVolume, left: Anchor, right: Anchor,
                            cfg: CorridorConfig | None = None) -> np.ndarray:
    """Minimum-flow-disagreement path between two anchors.

    Returns (t1 - t0 + 1, 2) points; the endpoints are the exact anchor
    positions (the search itself runs on lattice-snapped endpoints).
    """
    cfg = cfg or CorridorConfig()
    if left.t == right.t:
        raise SameFrameError(f"anchors share frame {left.t}")
    if left.t > right.t:
        raise BadOrderError(f"left anchor at {left.t} not before right at {right.t}")
    if cfg.corridor_radius < 1:
        raise ValueError("corridor_radius must be >= 1")

    t0, t1 = left.t, right.t
    span = t1 - t0
    a0 = np.array([left.pos.x, left.pos.y])
    a1 = np.array([right.pos.x, right.pos.y])

    # Per-frame candidate sets; endpoints collapse to the snapped anchors.
    candidates: list[np.ndarray] = [_snap(a0, cfg.lattice_step)[None, :]]
    for k in range(1, span):
        center = a0 + (a1 - a0) * (k / span)
        candidates.append(_lattice(center, cfg.corridor_radius, cfg.lattice_step))
    candidates.append(_snap(a1, cfg.lattice_step)[None, :])
    assert all(len(c) > 0 for c in candidates)

    # dp_cost: best path cost to each candidate of the current frame.
    # rank: lexicographic order of the best paths themselves; maintained so
    # ties can be broken without materializing paths.
    dp_cost = np.zeros(1)
    rank = np.zeros(1, dtype=int)
    parents: list[np.ndarray] = []
    prev = candidates[0]
    for k in range(1, span + 1):
        cur = candidates[k]
        fld = flow.fields[t0 + k - 1]
        samples = np.array([_sample_pair(fld.dx, fld.dy, u[0], u[1])
                            for u in prev])
        # step (nU, nV, 2): candidate move minus the flow-predicted move
        step = cur[None, :, :] - prev[:, None, :] - samples[:, None, :]
        edge = np.sqrt((step ** 2).sum(axis=2))
        total = dp_cost[:, None] + edge
        parent = np.empty(len(cur), dtype=int)
        cost = np.empty(len(cur))
        for j in range(len(cur)):
            col = total[:, j]
            best = col.min()
            ties = np.flatnonzero(col == best)
            parent[j] = ties[np.argmin(rank[ties])]
            cost[j] = best
        parents.append(parent)
        # New rank: order by (parent's path rank, own position); candidate
        # arrays are already (x, y)-sorted, so the index is the position key.
        order = np.lexsort((np.arange(len(cur)), rank[parent]))
        new_rank = np.empty(len(cur), dtype=int)
        new_rank[order] = np.arange(len(cur))
        dp_cost, rank, prev = cost, new_rank, cur

    path = np.empty((span + 1, 2))
    idx = 0
    for k in range(span, 0, -1):
        path[k] = candidates[k][idx]
        idx = parents[k - 1][idx]
    path[0] = candidates[0][0]
    path[0] = a0
    path[-1] = a1
    return path
