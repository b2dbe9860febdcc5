"""Point-precision evaluation against a reference trajectory.

The headline number is the mean, over a fixed set of pixel thresholds, of
the fraction of visible frames whose predicted position lies within the
threshold of the reference (inclusive comparison).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyError, LengthMismatchError, NoPairsError, NoVisibleFramesError

DEFAULT_THRESHOLDS = (1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class APPConfig:
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self):
        ts = self.thresholds
        if not ts or any(t <= 0 for t in ts) or any(a >= b for a, b in zip(ts, ts[1:])):
            raise ValueError("thresholds must be positive and strictly increasing")


@dataclass(frozen=True)
class APPReport:
    per_threshold: dict[float, float]
    app: float
    scored_frames: int


def _as_points(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise LengthMismatchError("points must be an (N, 2) array")
    return a


def _errors(pred, ref, vis) -> np.ndarray:
    p = _as_points(pred)
    r = _as_points(ref)
    v = np.asarray(vis, dtype=bool)
    if not (len(p) == len(r) == len(v)):
        raise LengthMismatchError(
            f"length mismatch: pred {len(p)}, ref {len(r)}, vis {len(v)}")
    if not v.any():
        raise NoVisibleFramesError("no visible frames to score")
    return np.linalg.norm(p[v] - r[v], axis=1)


def point_precision(pred, ref, vis, tau: float) -> float:
    """Fraction of visible frames with Euclidean error <= tau."""
    err = _errors(pred, ref, vis)
    return float((err <= tau).mean())


def app(pred, ref, vis, cfg: APPConfig | None = None) -> APPReport:
    """Per-threshold precision plus their arithmetic mean."""
    cfg = cfg or APPConfig()
    err = _errors(pred, ref, vis)
    per = {tau: float((err <= tau).mean()) for tau in cfg.thresholds}
    return APPReport(per_threshold=per,
                     app=float(np.mean(list(per.values()))),
                     scored_frames=int(len(err)))


def dataset_app(reports: list[APPReport]) -> float:
    """Unweighted mean of trajectory-level APP values."""
    if not reports:
        raise EmptyError("no reports to aggregate")
    return float(np.mean([r.app for r in reports]))


@dataclass(frozen=True)
class DisagreementSummary:
    distances: np.ndarray
    mean: float
    median: float
    # Cumulative-fraction curve: (sorted distance, fraction of pairs <= it).
    curve: np.ndarray = field(repr=False)


def disagreement(a, b, paired_frames: list[int]) -> DisagreementSummary:
    """Per-frame distances between two annotations of the same target."""
    if len(paired_frames) == 0:
        raise NoPairsError("no paired frames")
    pa = _as_points(a)
    pb = _as_points(b)
    frames = np.asarray(paired_frames, dtype=int)
    d = np.linalg.norm(pa[frames] - pb[frames], axis=1)
    srt = np.sort(d)
    curve = np.column_stack([srt, np.arange(1, len(srt) + 1) / len(srt)])
    return DisagreementSummary(distances=d, mean=float(d.mean()),
                               median=float(np.median(d)), curve=curve)


def joint_visibility(vis_a, vis_b) -> np.ndarray:
    """Frames scored only when both tracks are visible (conservative rule)."""
    return np.asarray(vis_a, dtype=bool) & np.asarray(vis_b, dtype=bool)


def report_row(track_id: str, report: APPReport) -> dict:
    """One CSV/JSON row per trajectory."""
    row = {"id": track_id}
    for tau, pp in report.per_threshold.items():
        row[f"pp_{tau:g}"] = pp
    row["app"] = report.app
    row["scored_frames"] = report.scored_frames
    return row
