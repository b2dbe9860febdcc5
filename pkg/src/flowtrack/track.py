"""Trajectory construction from a seed point and sparse anchors.

A track holds one anchor per annotated frame plus a full-length point
estimate.  Rebuilds propagate anchors through the flow volume and blend
forward/backward traces so the estimate passes exactly through every
anchor; spans before the first and after the last anchor use pure
one-directional propagation.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadOrderError,
    FrameOutOfRangeError,
    LastAnchorError,
    NoAnchorsError,
    NoSuchAnchorError,
    SameFrameError,
)
from .flow import FlowVolume, _sample_pair
from .video import Point2D


@dataclass
class Anchor:
    """A user-asserted (frame, position) pair the track must pass through."""

    t: int
    pos: Point2D
    visible: bool = True
    created_at: float = field(default_factory=time.time)
    origin: str = "correction"  # "seed" or "correction"


@dataclass(frozen=True)
class PropagationTrace:
    """Forward/backward traces and blend weights for one segment rebuild."""

    t0: int
    t1: int
    forward: np.ndarray   # (t1 - t0 + 1, 2)
    backward: np.ndarray  # (t1 - t0 + 1, 2)
    alpha: np.ndarray     # (t1 - t0 + 1,), affine from 0 to 1


@dataclass(frozen=True)
class RebuildStats:
    elapsed_ms: float
    frames_touched: int


@dataclass
class Track:
    """One annotated trajectory: frame-sorted anchors + per-frame estimates.

    Owned by a single session; mutated through insert_anchor/remove_anchor
    only, which keep ``points`` and ``visibility`` consistent.
    """

    id: str
    anchors: list[Anchor]
    points: np.ndarray      # (T, 2) float64, columns (x, y)
    visibility: np.ndarray  # (T,) bool
    label: str = ""

    @property
    def frame_count(self) -> int:
        return self.points.shape[0]

    def anchor_at(self, frame: int) -> Anchor | None:
        for a in self.anchors:
            if a.t == frame:
                return a
        return None


# --- propagation ----------------------------------------------------------

def _step_forward(flow: FlowVolume, t: int, x: float, y: float):
    f = flow.fields[t]
    dx, dy = _sample_pair(f.dx, f.dy, x, y)
    return x + dx, y + dy


def _step_backward(flow: FlowVolume, t: int, x: float, y: float):
    # p(t-1) = p(t) - F_{t-1}(p(t)): the flow is sampled at the current
    # (later-frame) position, not re-solved for the earlier one.
    f = flow.fields[t - 1]
    dx, dy = _sample_pair(f.dx, f.dy, x, y)
    return x - dx, y - dy


def _propagate_forward(flow: FlowVolume, pos: Point2D, t0: int, t1: int) -> np.ndarray:
    out = np.empty((t1 - t0 + 1, 2))
    x, y = pos.x, pos.y
    out[0] = (x, y)
    for t in range(t0, t1):
        x, y = _step_forward(flow, t, x, y)
        out[t - t0 + 1] = (x, y)
    return out


def _propagate_backward(flow: FlowVolume, pos: Point2D, t1: int, t0: int) -> np.ndarray:
    out = np.empty((t1 - t0 + 1, 2))
    x, y = pos.x, pos.y
    out[-1] = (x, y)
    for t in range(t1, t0, -1):
        x, y = _step_backward(flow, t, x, y)
        out[t - 1 - t0] = (x, y)
    return out


def propagate(flow: FlowVolume, seed: Anchor) -> np.ndarray:
    """Full-length trajectory from a single anchor by iterative flow lookup.

    Positions are free to leave the frame bounds; only the flow sampling
    clamps, so an off-frame drift stays visible in the coordinates.
    """
    T = flow.frame_count
    if not 0 <= seed.t < T:
        raise FrameOutOfRangeError(f"seed frame {seed.t} outside [0, {T - 1}]")
    out = np.empty((T, 2))
    out[seed.t:] = _propagate_forward(flow, seed.pos, seed.t, T - 1)
    out[:seed.t + 1] = _propagate_backward(flow, seed.pos, seed.t, 0)
    return out


def rebuild_segment(flow: FlowVolume, left: Anchor, right: Anchor
                    ) -> tuple[PropagationTrace, np.ndarray]:
    """Blend a forward trace from ``left`` with a backward trace from ``right``.

    The blend weight is affine in t, so the result passes exactly through
    both anchors and every intermediate estimate is a convex combination of
    the two traces.
    """
    if left.t == right.t:
        raise SameFrameError(f"anchors share frame {left.t}")
    if left.t > right.t:
        raise BadOrderError(f"left anchor at {left.t} not before right at {right.t}")
    t0, t1 = left.t, right.t
    fwd = _propagate_forward(flow, left.pos, t0, t1)
    bwd = _propagate_backward(flow, right.pos, t1, t0)
    alpha = (np.arange(t0, t1 + 1) - t0) / float(t1 - t0)
    blended = (1.0 - alpha)[:, None] * fwd + alpha[:, None] * bwd
    blended[0] = (left.pos.x, left.pos.y)
    blended[-1] = (right.pos.x, right.pos.y)
    return PropagationTrace(t0=t0, t1=t1, forward=fwd, backward=bwd,
                            alpha=alpha), blended


def _sorted_anchors(anchors: list[Anchor]) -> list[Anchor]:
    if not anchors:
        raise NoAnchorsError("at least one anchor required")
    srt = sorted(anchors, key=lambda a: a.t)
    for a, b in zip(srt, srt[1:]):
        if a.t == b.t:
            raise SameFrameError(f"duplicate anchors on frame {a.t}")
    return srt


def visibility_from_anchors(anchors: list[Anchor], T: int) -> np.ndarray:
    """Per-frame visibility: each frame inherits the nearest anchor at or
    before it; frames before the first anchor inherit the first anchor."""
    srt = _sorted_anchors(anchors)
    vis = np.empty(T, dtype=bool)
    vis[:srt[0].t] = srt[0].visible
    for a, nxt in zip(srt, srt[1:]):
        vis[a.t:nxt.t] = a.visible
    vis[srt[-1].t:] = srt[-1].visible
    return vis


def rebuild_track(flow: FlowVolume, anchors: list[Anchor]) -> np.ndarray:
    """Full-length points from an anchor list (blend interior, propagate edges)."""
    srt = _sorted_anchors(anchors)
    T = flow.frame_count
    for a in srt:
        if not 0 <= a.t < T:
            raise FrameOutOfRangeError(f"anchor frame {a.t} outside [0, {T - 1}]")
    if len(srt) == 1:
        pts = propagate(flow, srt[0])
        pts[srt[0].t] = (srt[0].pos.x, srt[0].pos.y)
        return pts
    pts = np.empty((T, 2))
    first, last = srt[0], srt[-1]
    pts[:first.t + 1] = _propagate_backward(flow, first.pos, first.t, 0)
    pts[last.t:] = _propagate_forward(flow, last.pos, last.t, T - 1)
    for left, right in zip(srt, srt[1:]):
        _, blended = rebuild_segment(flow, left, right)
        pts[left.t:right.t + 1] = blended
    for a in srt:
        pts[a.t] = (a.pos.x, a.pos.y)
    return pts


def interpolate_linear(anchors: list[Anchor], T: int) -> np.ndarray:
    """Straight-line baseline: affine between anchors, hold beyond the ends."""
    srt = _sorted_anchors(anchors)
    frames = np.array([a.t for a in srt], dtype=float)
    xs = np.array([a.pos.x for a in srt])
    ys = np.array([a.pos.y for a in srt])
    t = np.arange(T, dtype=float)
    pts = np.column_stack([np.interp(t, frames, xs), np.interp(t, frames, ys)])
    for a in srt:
        pts[a.t] = (a.pos.x, a.pos.y)
    return pts


# --- interactive editing ---------------------------------------------------

def new_track(flow: FlowVolume, seed: Anchor, label: str = "") -> Track:
    seed = replace(seed, origin="seed")
    pts = rebuild_track(flow, [seed])
    return Track(id=uuid.uuid4().hex[:12], anchors=[seed], points=pts,
                 visibility=visibility_from_anchors([seed], flow.frame_count),
                 label=label)


def _neighbors(anchors: list[Anchor], frame: int):
    """Nearest anchors strictly before/after ``frame`` (anchors sorted)."""
    left = right = None
    for a in anchors:
        if a.t < frame:
            left = a
        elif a.t > frame and right is None:
            right = a
    return left, right


def _rebuild_span(track: Track, flow: FlowVolume, center: Anchor,
                  left: Anchor | None, right: Anchor | None) -> int:
    """Recompute the spans adjacent to ``center``; returns frames touched."""
    T = track.frame_count
    touched = 0
    if left is None:
        track.points[:center.t + 1] = _propagate_backward(
            flow, center.pos, center.t, 0)
        touched += center.t + 1
    else:
        _, blended = rebuild_segment(flow, left, center)
        track.points[left.t:center.t + 1] = blended
        touched += center.t - left.t + 1
    if right is None:
        track.points[center.t:] = _propagate_forward(
            flow, center.pos, center.t, T - 1)
        touched += T - center.t
    else:
        _, blended = rebuild_segment(flow, center, right)
        track.points[center.t:right.t + 1] = blended
        touched += right.t - center.t
    track.points[center.t] = (center.pos.x, center.pos.y)
    return touched


def insert_anchor(track: Track, anchor: Anchor, flow: FlowVolume) -> RebuildStats:
    """Insert (or replace, on an occupied frame) an anchor and rebuild locally.

    Only the two spans adjacent to the new anchor are recomputed, so the
    per-insertion cost is independent of how many anchors the track holds.
    """
    T = track.frame_count
    if not 0 <= anchor.t < T:
        raise FrameOutOfRangeError(f"anchor frame {anchor.t} outside [0, {T - 1}]")
    start = time.perf_counter()
    existing = track.anchor_at(anchor.t)
    if existing is not None:
        # Re-clicking an occupied frame replaces the misplaced correction.
        track.anchors[track.anchors.index(existing)] = anchor
    else:
        track.anchors.append(anchor)
        track.anchors.sort(key=lambda a: a.t)
    left, right = _neighbors(track.anchors, anchor.t)
    touched = _rebuild_span(track, flow, anchor, left, right)
    track.visibility = visibility_from_anchors(track.anchors, T)
    elapsed = (time.perf_counter() - start) * 1000.0
    return RebuildStats(elapsed_ms=elapsed, frames_touched=touched)


def remove_anchor(track: Track, frame: int, flow: FlowVolume) -> None:
    """Drop the anchor at ``frame`` and rebuild the merged span."""
    target = track.anchor_at(frame)
    if target is None:
        raise NoSuchAnchorError(f"no anchor on frame {frame}")
    if len(track.anchors) == 1:
        raise LastAnchorError("cannot remove the final anchor")
    track.anchors.remove(target)
    left, right = _neighbors(track.anchors, frame)
    T = track.frame_count
    if left is None and right is not None:
        track.points[:right.t + 1] = _propagate_backward(
            flow, right.pos, right.t, 0)
        track.points[right.t] = (right.pos.x, right.pos.y)
    elif right is None and left is not None:
        track.points[left.t:] = _propagate_forward(
            flow, left.pos, left.t, T - 1)
        track.points[left.t] = (left.pos.x, left.pos.y)
    else:
        assert left is not None and right is not None
        _, blended = rebuild_segment(flow, left, right)
        track.points[left.t:right.t + 1] = blended
    track.visibility = visibility_from_anchors(track.anchors, T)


# --- JSON export/import -----------------------------------------------------

def track_to_dict(track: Track, meta: dict | None = None) -> dict:
    """Serializable document; field order is part of the format."""
    doc_meta = {"source": "", "W": 0, "H": 0, "T": track.frame_count,
                "created": ""}
    doc_meta.update(meta or {})
    return {
        "id": track.id,
        "label": track.label,
        "anchors": [
            {"frame": a.t, "x": a.pos.x, "y": a.pos.y,
             "visible": bool(a.visible), "origin": a.origin}
            for a in track.anchors
        ],
        "points": [
            {"frame": t, "x": float(track.points[t, 0]),
             "y": float(track.points[t, 1]),
             "visible": bool(track.visibility[t])}
            for t in range(track.frame_count)
        ],
        "meta": doc_meta,
    }


def track_from_dict(doc: dict) -> Track:
    anchors = [
        Anchor(t=int(a["frame"]), pos=Point2D(float(a["x"]), float(a["y"])),
               visible=bool(a.get("visible", True)),
               origin=a.get("origin", "correction"))
        for a in doc["anchors"]
    ]
    if not anchors:
        raise NoAnchorsError("track document has no anchors")
    pts_doc = sorted(doc["points"], key=lambda p: int(p["frame"]))
    points = np.array([[float(p["x"]), float(p["y"])] for p in pts_doc])
    visibility = np.array([bool(p.get("visible", True)) for p in pts_doc])
    return Track(id=str(doc.get("id", uuid.uuid4().hex[:12])),
                 anchors=sorted(anchors, key=lambda a: a.t),
                 points=points, visibility=visibility,
                 label=str(doc.get("label", "")))


def save_tracks(path: str, tracks: list[Track], meta: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump({"tracks": [track_to_dict(t, meta) for t in tracks]}, fh,
                  indent=2)


def load_tracks(path: str) -> list[Track]:
    with open(path) as fh:
        doc = json.load(fh)
    return [track_from_dict(d) for d in doc["tracks"]]
