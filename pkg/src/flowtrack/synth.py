"""Synthetic benchmark videos with analytically known target trajectories.

Each preset warps a fixed random texture with a time-dependent displacement
field and rides a few blob-marked material points on the same warp, so the
reference trajectory of every target is exact by construction.  These
sequences stand in for the non-public microscopy datasets in tests and
benchmarks.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter, map_coordinates

from .flow import FlowField, FlowVolume
from .track import Anchor, Track, visibility_from_anchors
from .video import Point2D, VideoSequence

PRESETS = ("static", "translate", "sinusoid", "deform")

_BLOB_SIGMA = 2.5
_BLOB_AMP = 0.45


def _texture(width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.random((height, width))
    smooth = gaussian_filter(noise, sigma=2.0, mode="wrap")
    lo, hi = smooth.min(), smooth.max()
    return 0.15 + 0.6 * (smooth - lo) / (hi - lo)


def _offsets(preset: str, frames: int, size: float,
             amplitude: float | None, period: float | None) -> np.ndarray:
    t = np.arange(frames, dtype=float)
    if preset == "static":
        return np.zeros((frames, 2))
    if preset == "translate":
        total = amplitude if amplitude is not None else size / 4.0
        v = total / max(1, frames - 1)
        return np.column_stack([v * t, 0.4 * v * t])
    if preset == "sinusoid":
        a = amplitude if amplitude is not None else size / 6.0
        p = period if period is not None else frames / 2.5
        return np.column_stack([a * np.sin(2 * np.pi * t / p),
                                0.5 * a * np.sin(4 * np.pi * t / p)])
    raise ValueError(f"preset {preset!r} has no global offset form")


def _deform_field(mx: np.ndarray, my: np.ndarray, t: float, frames: int,
                  size: float, amplitude: float | None,
                  period: float | None) -> tuple[np.ndarray, np.ndarray]:
    a = amplitude if amplitude is not None else size / 12.0
    p = period if period is not None else frames / 2.0
    lam = size / 2.0
    phase = 2 * np.pi * t / p
    dx = a * np.sin(2 * np.pi * my / lam + phase)
    dy = a * np.sin(2 * np.pi * mx / lam + phase + 1.0)
    return dx, dy


def _add_blob(frame: np.ndarray, x: float, y: float) -> None:
    h, w = frame.shape
    r = int(4 * _BLOB_SIGMA)
    x0, x1 = max(0, int(x) - r), min(w, int(x) + r + 1)
    y0, y1 = max(0, int(y) - r), min(h, int(y) + r + 1)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    frame[y0:y1, x0:x1] += _BLOB_AMP * np.exp(
        -((xs - x) ** 2 + (ys - y) ** 2) / (2 * _BLOB_SIGMA ** 2))


def _target_seeds(width: int, height: int, n: int) -> np.ndarray:
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    radius = min(width, height) / 5.0
    angles = 2 * np.pi * np.arange(n) / max(n, 1)
    return np.column_stack([cx + radius * np.cos(angles),
                            cy + radius * np.sin(angles)])


def generate(preset: str = "sinusoid", frames: int = 60, width: int = 96,
             height: int | None = None, rng_seed: int = 0, n_targets: int = 3,
             amplitude: float | None = None, period: float | None = None
             ) -> tuple[VideoSequence, list[Track]]:
    """Build a synthetic sequence plus its exact reference tracks.

    Reference tracks carry the analytic per-frame positions, a single seed
    anchor on frame 0, and full visibility.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    if frames < 2:
        raise ValueError("frames must be >= 2")
    height = height if height is not None else width
    size = float(min(width, height))
    rng = np.random.Generator(np.random.Philox(key=[rng_seed, 0]))
    texture = _texture(width, height, rng)
    seeds = _target_seeds(width, height, n_targets)

    ys_grid, xs_grid = np.mgrid[0:height, 0:width].astype(float)
    stack = np.empty((frames, height, width), dtype=np.float32)
    trajectories = np.empty((frames, n_targets, 2))

    if preset == "deform":
        for t in range(frames):
            # Invert the forward warp by fixed-point iteration; the
            # amplitude is small relative to the wavelength, so a few
            # sweeps suffice.
            mx, my = xs_grid.copy(), ys_grid.copy()
            for _ in range(4):
                dx, dy = _deform_field(mx, my, t, frames, size,
                                       amplitude, period)
                mx = xs_grid - dx
                my = ys_grid - dy
            stack[t] = map_coordinates(texture, [my, mx], order=1,
                                       mode="grid-wrap")
            dxs, dys = _deform_field(seeds[:, 0], seeds[:, 1], t, frames,
                                     size, amplitude, period)
            trajectories[t, :, 0] = seeds[:, 0] + dxs
            trajectories[t, :, 1] = seeds[:, 1] + dys
            for i in range(n_targets):
                _add_blob(stack[t], trajectories[t, i, 0],
                          trajectories[t, i, 1])
    else:
        offsets = _offsets(preset, frames, size, amplitude, period)
        for t in range(frames):
            stack[t] = map_coordinates(
                texture, [ys_grid - offsets[t, 1], xs_grid - offsets[t, 0]],
                order=1, mode="grid-wrap")
            trajectories[t] = seeds + offsets[t]
            for i in range(n_targets):
                _add_blob(stack[t], trajectories[t, i, 0],
                          trajectories[t, i, 1])

    np.clip(stack, 0.0, 1.0, out=stack)
    video = VideoSequence(pixels=stack, source_path=f"synth:{preset}",
                          bit_depth=8)

    tracks = []
    for i in range(n_targets):
        seed = Anchor(t=0, pos=Point2D(*trajectories[0, i]), origin="seed")
        tracks.append(Track(
            id=f"ref_{preset}_{i}",
            anchors=[seed],
            points=trajectories[:, i, :].copy(),
            visibility=visibility_from_anchors([seed], frames),
            label=f"{preset} target {i}",
        ))
    return video, tracks


def save_tiff(path: str, video: VideoSequence) -> None:
    """Write the sequence as an 8-bit grayscale multi-page TIFF."""
    pages = [Image.fromarray(np.round(video.pixels[t] * 255).astype(np.uint8))
             for t in range(video.frame_count)]
    pages[0].save(path, save_all=True, append_images=pages[1:])


def constant_flow_volume(width: int, height: int, frames: int,
                         offsets: np.ndarray) -> FlowVolume:
    """Exact flow for a globally translating scene.

    Per-frame displacement grids are broadcast views of scalars, so a long
    high-resolution volume costs almost no memory.
    """
    fields = []
    for t in range(frames - 1):
        step = offsets[t + 1] - offsets[t]
        fields.append(FlowField(
            t=t,
            dx=np.broadcast_to(np.float32(step[0]), (height, width)),
            dy=np.broadcast_to(np.float32(step[1]), (height, width)),
        ))
    return FlowVolume(fields=fields, width=width, height=height,
                      frame_count=frames)


def preset_offsets(preset: str, frames: int, size: float,
                   amplitude: float | None = None,
                   period: float | None = None) -> np.ndarray:
    """Public accessor for the global-offset presets (not ``deform``)."""
    return _offsets(preset, frames, size, amplitude, period)
