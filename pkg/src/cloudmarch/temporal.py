"""Temporal anti-aliasing resolve for the low-resolution cloud buffer.

Core of a feedback TAA: reproject each pixel into the previous frame using its
representative depth, fetch history bilinearly, clamp it to the 3x3
neighborhood range of the current frame, then blend exponentially. Images are
float arrays of shape (H, W, C); color+alpha buffers use C = 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .camera import CameraPose, pixel_ndc, ray_directions

CLAMP_MODES = ("none", "minmax_3x3")


@dataclass(frozen=True)
class TaaConfig:
    enabled: bool = True
    history_weight: float = 0.9
    clamp_mode: str = "minmax_3x3"
    feedback_on_reproject_miss: str = "use_current"

    def __post_init__(self):
        if not 0.0 <= self.history_weight < 1.0:
            raise ValueError(f"history_weight must lie in [0, 1), got {self.history_weight}")
        if self.clamp_mode not in CLAMP_MODES:
            raise ValueError(f"clamp_mode must be one of {CLAMP_MODES}")
        if self.feedback_on_reproject_miss != "use_current":
            raise ValueError("feedback_on_reproject_miss supports only 'use_current'")


@dataclass
class FrameState:
    resolution: tuple[int, int]
    current: np.ndarray
    history: Optional[np.ndarray]
    depth: np.ndarray
    frame_index: int
    camera_current: CameraPose
    camera_previous: Optional[CameraPose]

    def __post_init__(self):
        w, h = self.resolution
        if self.current.shape[:2] != (h, w) or self.depth.shape != (h, w):
            raise ValueError("current and depth images must match the frame resolution")
        if self.history is not None and self.history.shape != self.current.shape:
            raise ValueError("history image must match the current image shape")
        for img in (self.current, self.history):
            if img is not None and img.shape[2] == 4 and (
                    img[..., 3].min() < 0.0 or img[..., 3].max() > 1.0):
                raise ValueError("alpha channel must lie in [0, 1]")


def reproject_many(xs, ys, depth, camera_current: CameraPose, camera_previous: CameraPose,
                   resolution):
    """Vectorized reprojection. Returns (u, v, valid) arrays."""
    depth = np.asarray(depth, dtype=np.float64)
    dirs = ray_directions(camera_current, xs, ys, resolution)
    world = np.asarray(camera_current.position) + dirs * depth[..., None]
    homo = np.concatenate([world, np.ones(world.shape[:-1] + (1,))], axis=-1)
    clip = homo @ camera_previous.view_projection.T
    w = clip[..., 3]
    front = (w > 0) & (depth > 0)
    safe_w = np.where(front, w, 1.0)
    u = 0.5 * (clip[..., 0] / safe_w + 1.0)
    v = 0.5 * (1.0 - clip[..., 1] / safe_w)
    valid = front & (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)
    return u, v, valid


def reproject_uv(pixel, depth: float, camera_current: CameraPose, camera_previous: CameraPose,
                 resolution) -> Optional[tuple[float, float]]:
    """Texture coordinates of ``pixel``'s surface point in the previous frame, or None."""
    if not depth > 0:
        raise ValueError("depth must be > 0")
    u, v, ok = reproject_many(pixel[0], pixel[1], depth, camera_current, camera_previous,
                              resolution)
    if not ok:
        return None
    return float(u), float(v)


def pixel_center_uv(pixel, resolution) -> tuple[float, float]:
    ndc_x, ndc_y = pixel_ndc(pixel[0], pixel[1], resolution)
    return float(0.5 * (ndc_x + 1.0)), float(0.5 * (1.0 - ndc_y))


def bilinear(image: np.ndarray, u, v) -> np.ndarray:
    """Bilinear fetch at normalized coords with edge-clamped addressing."""
    h, w = image.shape[:2]
    x = np.asarray(u, dtype=np.float64) * w - 0.5
    y = np.asarray(v, dtype=np.float64) * h - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    xa, xb = np.clip(x0, 0, w - 1), np.clip(x0 + 1, 0, w - 1)
    ya, yb = np.clip(y0, 0, h - 1), np.clip(y0 + 1, 0, h - 1)
    top = image[ya, xa] * (1.0 - fx) + image[ya, xb] * fx
    bottom = image[yb, xa] * (1.0 - fx) + image[yb, xb] * fx
    return top * (1.0 - fy) + bottom * fy


def sample_history(history: np.ndarray, uv) -> np.ndarray:
    u, v = uv
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError("uv must lie in [0, 1]^2")
    return bilinear(history, u, v)


def neighborhood_bounds(current: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel channel min and max over the edge-clamped 3x3 neighborhood."""
    h, w = current.shape[:2]
    padded = np.pad(current, ((1, 1), (1, 1), (0, 0)), mode="edge")
    lo = current.copy()
    hi = current.copy()
    for dy in range(3):
        for dx in range(3):
            win = padded[dy:dy + h, dx:dx + w]
            np.minimum(lo, win, out=lo)
            np.maximum(hi, win, out=hi)
    return lo, hi


def neighborhood_clamp(current: np.ndarray, pixel, history_sample, clamp_mode: str = "minmax_3x3"):
    if clamp_mode == "none":
        return np.asarray(history_sample, dtype=np.float64)
    if clamp_mode != "minmax_3x3":
        raise ValueError(f"unknown clamp mode {clamp_mode!r}")
    x, y = pixel
    h, w = current.shape[:2]
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"pixel {pixel} out of bounds")
    win = current[max(y - 1, 0):min(y + 2, h), max(x - 1, 0):min(x + 2, w)]
    win = win.reshape(-1, current.shape[2])
    return np.clip(history_sample, win.min(axis=0), win.max(axis=0))


def taa_resolve(frame: FrameState, config: TaaConfig) -> np.ndarray:
    """Blend the reprojected, clamped history into the current frame.

    With no history (first frame) the current image is returned unchanged.
    """
    current = frame.current
    if frame.history is None or frame.camera_previous is None:
        return current.copy()
    h, w = current.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w]
    u, v, valid = reproject_many(xs, ys, frame.depth, frame.camera_current,
                                 frame.camera_previous, frame.resolution)
    hist = bilinear(frame.history, np.clip(u, 0.0, 1.0), np.clip(v, 0.0, 1.0))
    if config.clamp_mode == "minmax_3x3":
        lo, hi = neighborhood_bounds(current)
        hist = np.clip(hist, lo, hi)
    wgt = config.history_weight
    blended = wgt * hist + (1.0 - wgt) * current
    return np.where(valid[..., None], blended, current)
