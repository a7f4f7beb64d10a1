"""Binary PPM (P6) output with a clamp + gamma 2.2 display transform."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

GAMMA = 2.2
_HEADER = re.compile(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s")


def tonemap(linear: np.ndarray) -> np.ndarray:
    """Clamp linear RGB to [0, 1] and apply display gamma."""
    return np.clip(linear, 0.0, 1.0) ** (1.0 / GAMMA)


def encode_ppm(linear: np.ndarray, sixteen_bit: bool = False) -> bytes:
    h, w = linear.shape[:2]
    display = tonemap(np.asarray(linear, dtype=np.float64)[..., :3])
    if sixteen_bit:
        data = np.rint(display * 65535.0).astype(">u2").tobytes()
        maxval = 65535
    else:
        data = np.rint(display * 255.0).astype(np.uint8).tobytes()
        maxval = 255
    return b"P6\n%d %d\n%d\n" % (w, h, maxval) + data


def write_ppm(path, linear: np.ndarray, sixteen_bit: bool = False) -> Path:
    path = Path(path)
    path.write_bytes(encode_ppm(linear, sixteen_bit))
    return path


def read_ppm(path) -> np.ndarray:
    """Read a P6 file written by ``write_ppm``; returns display-encoded values in [0, 1]."""
    raw = Path(path).read_bytes()
    m = _HEADER.match(raw)
    if m is None:
        raise ValueError("not a binary PPM (P6) file")
    w, h, maxval = (int(g) for g in m.groups())
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    pixels = np.frombuffer(raw, dtype=dtype, count=w * h * 3, offset=m.end())
    return pixels.reshape(h, w, 3).astype(np.float64) / maxval
