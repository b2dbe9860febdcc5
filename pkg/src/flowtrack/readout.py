"""Pixel-signal sampling along tracks and baseline normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    GeometryMismatchError,
    ShortTraceError,
    ZeroBaselineError,
    ZeroVarianceError,
)
from .track import Track
from .video import VideoSequence


@dataclass(frozen=True)
class SignalTrace:
    track_id: str
    values: np.ndarray  # (T,) float; meaningful only where valid
    valid: np.ndarray   # (T,) bool


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0 else int(math.ceil(v - 0.5))


def sample_intensity(video: VideoSequence, track: Track,
                     mode: str = "nearest") -> SignalTrace:
    """Per-frame intensity at the tracked coordinate.

    ``nearest`` (default) reads the single pixel under the point,
    round-half-away-from-zero; ``bilinear`` interpolates the four
    neighbors.  Out-of-bounds or invisible frames are marked invalid.
    """
    if video.frame_count != track.frame_count:
        raise GeometryMismatchError(
            f"video has {video.frame_count} frames, track {track.frame_count}")
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    T = video.frame_count
    h, w = video.height, video.width
    values = np.zeros(T)
    valid = np.zeros(T, dtype=bool)
    for t in range(T):
        x, y = track.points[t]
        if not track.visibility[t]:
            continue
        if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
            continue
        img = video.pixels[t]
        if mode == "nearest":
            values[t] = img[_round_half_away(y), _round_half_away(x)]
        else:
            x0, y0 = int(x), int(y)
            x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
            fx, fy = x - x0, y - y0
            values[t] = ((1 - fx) * (1 - fy) * img[y0, x0]
                         + fx * (1 - fy) * img[y0, x1]
                         + (1 - fx) * fy * img[y1, x0]
                         + fx * fy * img[y1, x1])
        valid[t] = True
    return SignalTrace(track_id=track.id, values=values, valid=valid)


def dff(trace: SignalTrace, baseline_frames: int = 11) -> np.ndarray:
    """Baseline-normalized change (F - F0) / F0, with F0 the mean of the
    first ``baseline_frames`` frames.  NaN on invalid frames."""
    if baseline_frames < 1:
        raise ValueError("baseline_frames must be >= 1")
    if not trace.valid[:baseline_frames].all():
        raise ShortTraceError(
            f"first {baseline_frames} frames must all be valid")
    f0 = float(trace.values[:baseline_frames].mean())
    if f0 == 0.0:
        raise ZeroBaselineError("baseline mean is zero")
    out = np.full(len(trace.values), np.nan)
    out[trace.valid] = (trace.values[trace.valid] - f0) / f0
    return out


def zscore(values) -> np.ndarray:
    """Standardize over non-NaN frames; population (divide-by-N) sigma."""
    v = np.asarray(values, dtype=float)
    ok = ~np.isnan(v)
    mu = v[ok].mean()
    sigma = v[ok].std()  # ddof=0
    if sigma == 0.0:
        raise ZeroVarianceError("trace has zero variance")
    out = np.full(v.shape, np.nan)
    out[ok] = (v[ok] - mu) / sigma
    return out
