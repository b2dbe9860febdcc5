"""Image-sequence loading, validation, and rescaling.

Coordinate convention used repo-wide: points are (x, y) with x growing
rightward along columns and y growing downward along rows; the origin is
the center of the top-left pixel.  Pixel grids are indexed [row, col],
i.e. grid[y, x].
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import cv2
import numpy as np
from PIL import Image, ImageSequence

from .errors import (
    BadSizeError,
    DimensionMismatchError,
    NotFoundError,
    TooShortError,
    UnsupportedDepthError,
)

_FRAME_EXTENSIONS = (".png", ".pgm", ".tif", ".tiff")


@dataclass(frozen=True)
class Point2D:
    """Sub-pixel image coordinate (x = column, y = row)."""

    x: float
    y: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Frame:
    """One frame of a sequence; pixels are H x W floats in [0, 1]."""

    index: int
    pixels: np.ndarray


@dataclass(frozen=True)
class VideoSequence:
    """Immutable stack of same-sized grayscale frames, intensities in [0, 1].

    ``pixels`` is a (T, H, W) float32 array; individual ``Frame`` views are
    produced on demand.  Safe to share across threads.
    """

    pixels: np.ndarray
    source_path: str = ""
    bit_depth: int = 8

    def __post_init__(self):
        if self.pixels.ndim != 3:
            raise DimensionMismatchError("expected a (T, H, W) pixel array")
        if self.pixels.shape[0] < 2:
            raise TooShortError(f"need at least 2 frames, got {self.pixels.shape[0]}")
        self.pixels.setflags(write=False)

    @property
    def frame_count(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def frame(self, t: int) -> Frame:
        return Frame(index=t, pixels=self.pixels[t])

    @property
    def frames(self) -> list[Frame]:
        return [self.frame(t) for t in range(self.frame_count)]


def _pil_to_gray(img: Image.Image, channel: int | None) -> tuple[np.ndarray, int]:
    """Convert one PIL image to a float64 grayscale array plus its bit depth."""
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        depth = 8
    elif arr.dtype in (np.uint16, np.int32):
        # Pillow reads 16-bit grayscale as mode "I" (int32) or "I;16".
        depth = 16
        arr = arr.astype(np.uint16)
    else:
        raise UnsupportedDepthError(f"unsupported pixel dtype {arr.dtype}")
    if arr.ndim == 3:
        if channel is not None:
            if not 0 <= channel < arr.shape[2]:
                raise UnsupportedDepthError(
                    f"channel {channel} out of range for {arr.shape[2]}-channel input"
                )
            arr = arr[:, :, channel]
        else:
            # Unweighted channel mean; the tracked signal is effectively
            # single-channel, so no luma weighting.
            arr = arr.astype(np.float64).mean(axis=2)
    return arr.astype(np.float64), depth


def _collect_grays(path: str, kind: str, channel: int | None):
    grays: list[np.ndarray] = []
    depth = None
    if kind == "tiff_stack":
        if not os.path.isfile(path):
            raise NotFoundError(f"no such file: {path}")
        with Image.open(path) as img:
            for page in ImageSequence.Iterator(img):
                gray, d = _pil_to_gray(page, channel)
                grays.append(gray)
                depth = d if depth is None else depth
    elif kind == "image_dir":
        if not os.path.isdir(path):
            raise NotFoundError(f"no such directory: {path}")
        names = sorted(
            n for n in os.listdir(path)
            if n.lower().endswith(_FRAME_EXTENSIONS)
        )
        if not names:
            raise NotFoundError(f"no frame files in {path}")
        for name in names:
            with Image.open(os.path.join(path, name)) as img:
                gray, d = _pil_to_gray(img, channel)
            grays.append(gray)
            depth = d if depth is None else depth
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return grays, depth


def load_sequence(path: str, kind: str = "tiff_stack",
                  channel: int | None = None) -> VideoSequence:
    """Load a multi-page TIFF or a directory of frames into a VideoSequence.

    ``channel`` selects one channel of multi-channel input; by default
    channels are averaged.  8-bit data is normalized by 255, 16-bit data by
    the per-sequence maximum so dim sources keep their dynamic range.
    """
    grays, depth = _collect_grays(path, kind, channel)
    if len(grays) < 2:
        raise TooShortError(f"sequence has {len(grays)} frame(s); need at least 2")
    shape = grays[0].shape
    for t, g in enumerate(grays):
        if g.shape != shape:
            raise DimensionMismatchError(
                f"frame {t} is {g.shape[1]}x{g.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}"
            )
    stack = np.stack(grays)
    if depth == 8:
        stack /= 255.0
    else:
        peak = stack.max()
        stack /= peak if peak > 0 else 1.0
    return VideoSequence(pixels=np.clip(stack, 0.0, 1.0).astype(np.float32),
                         source_path=str(path), bit_depth=depth)


def rescale_sequence(video: VideoSequence, new_w: int, new_h: int) -> VideoSequence:
    """Bilinearly resample every frame to (new_w, new_h); T is unchanged."""
    if new_w < 2 or new_h < 2:
        raise BadSizeError(f"target size {new_w}x{new_h} below 2x2 minimum")
    out = np.empty((video.frame_count, new_h, new_w), dtype=np.float32)
    for t in range(video.frame_count):
        out[t] = cv2.resize(video.pixels[t], (new_w, new_h),
                            interpolation=cv2.INTER_LINEAR)
    return VideoSequence(pixels=out, source_path=video.source_path,
                         bit_depth=video.bit_depth)


def rescale_points(points: list[Point2D], from_size: tuple[int, int],
                   to_size: tuple[int, int]) -> list[Point2D]:
    """Scale points by the per-axis size ratio (pure function)."""
    sx = to_size[0] / from_size[0]
    sy = to_size[1] / from_size[1]
    return [Point2D(p.x * sx, p.y * sy) for p in points]
