"""Binary flow cache.

Layout (little-endian): 4-byte magic ``RPLF``, then u32 version, T, H, W,
then (T-1) x H x W x 2 float32 values with the last axis ordered (dx, dy).
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import NotFoundError
from . import FlowField, FlowVolume

MAGIC = b"RPLF"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def write_cache(path: str, volume: FlowVolume) -> None:
    data = np.empty((volume.frame_count - 1, volume.height, volume.width, 2),
                    dtype="<f4")
    for t, f in enumerate(volume.fields):
        data[t, :, :, 0] = f.dx
        data[t, :, :, 1] = f.dy
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, volume.frame_count,
                              volume.height, volume.width))
        fh.write(data.tobytes())


def read_cache(path: str) -> FlowVolume:
    try:
        fh = open(path, "rb")
    except FileNotFoundError:
        raise NotFoundError(f"no flow cache at {path}") from None
    with fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated flow cache header")
        magic, version, t, h, w = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported cache version {version}")
        raw = np.frombuffer(fh.read(), dtype="<f4")
    expected = (t - 1) * h * w * 2
    if raw.size != expected:
        raise ValueError(f"{path}: expected {expected} floats, got {raw.size}")
    data = raw.reshape(t - 1, h, w, 2)
    fields = [
        FlowField(t=i, dx=np.ascontiguousarray(data[i, :, :, 0]),
                  dy=np.ascontiguousarray(data[i, :, :, 1]))
        for i in range(t - 1)
    ]
    return FlowVolume(fields=fields, width=w, height=h, frame_count=t)
