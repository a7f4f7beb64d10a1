"""Frame pipeline: march the cloud buffer, resolve TAA, upsample, composite."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import raymarch
from .camera import CameraPose, generate_ray, image_rays
from .noisefield import DensityField
from .raymarch import RaymarchConfig, SampleCounter
from .temporal import FrameState, TaaConfig, bilinear, taa_resolve
from .transport import MediumParams

__all__ = [
    "SceneConfig", "FrameStats", "RenderedFrame", "generate_ray", "render_frame",
    "render_sequence", "buffer_resolution", "composite",
]

BUFFER_SCALES = {"full": 1, "half": 2, "quarter": 4}


@dataclass(frozen=True)
class SceneConfig:
    field: DensityField
    medium: MediumParams
    camera: CameraPose
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    display_resolution: tuple[int, int] = (256, 256)
    cloud_buffer_scale: str = "full"
    raymarch: RaymarchConfig = RaymarchConfig()
    taa: TaaConfig = TaaConfig(enabled=False)

    def __post_init__(self):
        w, h = self.display_resolution
        if int(w) != w or int(h) != h or w < 1 or h < 1:
            raise ValueError(f"display_resolution must be positive integers, got {self.display_resolution}")
        object.__setattr__(self, "display_resolution", (int(w), int(h)))
        if self.cloud_buffer_scale not in BUFFER_SCALES:
            raise ValueError(f"cloud_buffer_scale must be one of {tuple(BUFFER_SCALES)}")
        bg = tuple(float(c) for c in self.background)
        if len(bg) != 3 or min(bg) < 0:
            raise ValueError("background must be a non-negative RGB triple")
        object.__setattr__(self, "background", bg)

    @property
    def buffer_resolution(self) -> tuple[int, int]:
        return buffer_resolution(self.display_resolution, self.cloud_buffer_scale)

    def with_changes(self, **changes) -> "SceneConfig":
        return replace(self, **changes)


def buffer_resolution(display_resolution, scale: str) -> tuple[int, int]:
    div = BUFFER_SCALES[scale]
    w, h = display_resolution
    return max(w // div, 1), max(h // div, 1)


@dataclass
class FrameStats:
    density_samples: int = 0
    light_samples: int = 0
    wall_time: float = 0.0


@dataclass
class RenderedFrame:
    cloud_buffer: np.ndarray
    final_image: np.ndarray
    stats: FrameStats


def upsample(buffer: np.ndarray, display_resolution) -> np.ndarray:
    """Bilinear resample of a (h, w, C) buffer to display size; identity when sizes match."""
    w, h = display_resolution
    if buffer.shape[:2] == (h, w):
        return buffer.copy()
    ys, xs = np.mgrid[0:h, 0:w]
    return bilinear(buffer, (xs + 0.5) / w, (ys + 0.5) / h)


def composite(cloud_rgba: np.ndarray, background) -> np.ndarray:
    """Premultiplied-alpha over: color + (1 - alpha) * background."""
    bg = np.asarray(background, dtype=np.float64)
    return cloud_rgba[..., :3] + (1.0 - cloud_rgba[..., 3:4]) * bg


def march_buffer(scene: SceneConfig, camera: CameraPose, frame_index: int,
                 counter: SampleCounter):
    """March every cloud-buffer pixel; returns (rgba, depth)."""
    w, h = scene.buffer_resolution
    origin, dirs = image_rays(camera, (w, h))
    dirs = dirs.reshape(-1, 3)
    t0, t1, hit = raymarch.intersect_many(origin, dirs, scene.field.bounds)
    cfg = scene.raymarch
    ys, xs = np.mgrid[0:h, 0:w]
    units = raymarch.jitter_units(xs.ravel(), ys.ravel(), frame_index, cfg.jitter_mode,
                                  cfg.jitter_seed)
    offsets = units * np.where(hit, (t1 - t0) / cfg.n_steps, 0.0)
    res = raymarch.march_rays(scene.field, scene.medium, origin, dirs, t0, t1, cfg, offsets,
                              counter)
    rgba = np.concatenate([res.color, res.alpha[:, None]], axis=1).reshape(h, w, 4)
    return rgba, res.mean_depth.reshape(h, w)


def render_frame(scene: SceneConfig, frame_state: Optional[FrameState], frame_index: int,
                 camera: Optional[CameraPose] = None) -> tuple[RenderedFrame, FrameState]:
    """Render one frame and return it with the state to pass to the next frame."""
    start = time.perf_counter()
    camera = camera or scene.camera
    res = scene.buffer_resolution
    if frame_state is not None and tuple(frame_state.resolution) != res:
        raise ValueError(
            f"history resolution {frame_state.resolution} does not match cloud buffer {res}; "
            "the scene changed mid-sequence"
        )
    counter = SampleCounter()
    current, depth = march_buffer(scene, camera, frame_index, counter)

    prev_camera = frame_state.camera_current if frame_state is not None else None
    state = FrameState(res, current, None if frame_state is None else frame_state.history,
                       depth, frame_index, camera, prev_camera)
    if scene.taa.enabled:
        resolved = taa_resolve(state, scene.taa)
    else:
        resolved = current
    state.history = resolved

    final = composite(upsample(resolved, scene.display_resolution), scene.background)
    stats = FrameStats(counter.density_samples, counter.light_samples,
                       time.perf_counter() - start)
    return RenderedFrame(resolved, final, stats), state


def render_sequence(scene: SceneConfig, n_frames: int,
                    camera_path: Optional[Sequence[CameraPose]] = None) -> list[RenderedFrame]:
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if camera_path is not None and len(camera_path) != n_frames:
        raise ValueError(f"camera_path has {len(camera_path)} poses for {n_frames} frames")
    frames = []
    state = None
    for i in range(n_frames):
        cam = camera_path[i] if camera_path is not None else None
        frame, state = render_frame(scene, state, i, cam)
        frames.append(frame)
    return frames
