"""Primary raymarch, sun-ward lighting march and per-pixel start jitter.

The marcher is vectorized over rays: every step advances all still-active
rays at once. Per-ray results are identical to marching each ray on its own
(no cross-ray state), so ``march_primary`` is simply the one-ray case.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import noisefield, transport
from ._hash import as_u32, hash4, to_unit
from .noisefield import DensityField, VolumeBounds
from .transport import MediumParams

INTEGRATION_MODES = ("naive", "analytic")
JITTER_MODES = ("off", "per_pixel", "per_frame_uniform")
DEFAULT_EARLY_OUT = 1.0 - 1e-4


@dataclass(frozen=True)
class RaymarchConfig:
    """Raymarch settings. ``alpha_early_out = 1.0`` disables early termination."""

    n_steps: int = 128
    n_light_steps: int = 6
    integration_mode: str = "analytic"
    jitter_mode: str = "off"
    alpha_early_out: float = DEFAULT_EARLY_OUT
    jitter_seed: int = 0

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        if int(self.n_light_steps) != self.n_light_steps or self.n_light_steps < 1:
            raise ValueError(f"n_light_steps must be an integer >= 1, got {self.n_light_steps}")
        if self.integration_mode not in INTEGRATION_MODES:
            raise ValueError(f"integration_mode must be one of {INTEGRATION_MODES}")
        if self.jitter_mode not in JITTER_MODES:
            raise ValueError(f"jitter_mode must be one of {JITTER_MODES}")
        if not 0.0 < self.alpha_early_out <= 1.0:
            raise ValueError("alpha_early_out must lie in (0, 1]")


@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    t_min: float
    t_max: float

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "direction", tuple(float(x) for x in self.direction))
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-6:
            raise ValueError("ray direction must be unit length")
        if not 0.0 <= self.t_min <= self.t_max:
            raise ValueError("ray interval must satisfy 0 <= t_min <= t_max")

    @classmethod
    def through(cls, origin, direction, bounds: VolumeBounds) -> "Ray":
        """Ray clipped to ``bounds``; a miss gives the empty interval [0, 0]."""
        hit = intersect_bounds(origin, direction, bounds)
        t0, t1 = hit if hit is not None else (0.0, 0.0)
        return cls(tuple(origin), tuple(direction), t0, t1)


@dataclass(frozen=True)
class PixelSample:
    color: tuple[float, float, float]
    alpha: float
    mean_depth: float


@dataclass
class SampleCounter:
    """Running totals of density lookups made by the marchers."""

    density_samples: int = 0
    light_samples: int = 0


@dataclass
class MarchResult:
    color: np.ndarray
    alpha: np.ndarray
    mean_depth: np.ndarray
    steps_taken: np.ndarray
    transmittance_trace: list = dc_field(default_factory=list)


def intersect_many(origins, directions, bounds: VolumeBounds):
    """Slab test for many rays. Returns (t_min, t_max, hit) with t clamped to >= 0."""
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(directions, dtype=np.float64)
    o, d = np.broadcast_arrays(o, d)
    lo = np.asarray(bounds.min_corner)
    hi = np.asarray(bounds.max_corner)
    parallel = d == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    inside_slab = (o >= lo) & (o <= hi)
    near = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2))
    far = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2))
    t_near = np.maximum(np.max(near, axis=-1), 0.0)
    t_far = np.min(far, axis=-1)
    hit = t_far > t_near
    return np.where(hit, t_near, 0.0), np.where(hit, t_far, 0.0), hit


def intersect_bounds(origin, direction, bounds: VolumeBounds) -> Optional[tuple[float, float]]:
    t0, t1, hit = intersect_many(origin, direction, bounds)
    if not hit:
        return None
    return float(t0), float(t1)


def jitter_units(xs, ys, frame_index: int, mode: str, seed: int = 0) -> np.ndarray:
    """Uniform [0, 1) start-offset fractions for pixels (xs, ys) at ``frame_index``.

    ``per_pixel`` hashes (x, y, frame, seed); ``per_frame_uniform`` hashes only
    (frame, seed) so every pixel of a frame shares the same offset.
    """
    xs, ys = np.broadcast_arrays(np.asarray(xs), np.asarray(ys))
    if mode == "off":
        return np.zeros(xs.shape)
    f = as_u32(np.full(xs.shape, frame_index))
    s = as_u32(np.full(xs.shape, seed))
    if mode == "per_pixel":
        return to_unit(hash4(as_u32(xs), as_u32(ys), f, s))
    if mode == "per_frame_uniform":
        zero = np.zeros(xs.shape, dtype=np.uint64)
        return to_unit(hash4(zero, zero, f, s))
    raise ValueError(f"unknown jitter mode {mode!r}")


def jitter_offset(pixel_x: int, pixel_y: int, frame_index: int, step_length: float,
                  mode: str, seed: int = 0) -> float:
    if not step_length > 0:
        raise ValueError("step_length must be > 0")
    u = float(jitter_units(pixel_x, pixel_y, frame_index, mode, seed))
    return u * step_length


def light_march(field: DensityField, medium: MediumParams, from_point, n_light_steps: int,
                counter: Optional[SampleCounter] = None):
    """Sun transmittance from ``from_point`` (a point or an (N, 3) array).

    The segment of the sun-ward ray inside the bounds is split into
    ``n_light_steps`` equal steps with density taken at each step midpoint.
    """
    if n_light_steps < 1:
        raise ValueError("n_light_steps must be >= 1")
    pts = np.asarray(from_point, dtype=np.float64)
    scalar = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    sun = np.asarray(medium.sun_direction)
    t0, t1, _ = intersect_many(pts, sun, field.bounds)
    step = (t1 - t0) / n_light_steps
    ts = t0[:, None] + (np.arange(n_light_steps) + 0.5) * step[:, None]
    samples = pts[:, None, :] + ts[..., None] * sun
    rho = noisefield.sample_density(field, samples)
    if counter is not None:
        counter.light_samples += rho.size
    tau = np.zeros(pts.shape[0])
    for j in range(n_light_steps):
        tau += rho[:, j] * step
    trans = np.exp(-medium.absorption * tau)
    return float(trans[0]) if scalar else trans


def march_rays(field: DensityField, medium: MediumParams, origins, directions, t_min, t_max,
               config: RaymarchConfig, offsets, counter: Optional[SampleCounter] = None,
               record_transmittance: bool = False) -> MarchResult:
    """March N rays through ``field``. Rays with ``t_max <= t_min`` take no steps.

    ``offsets`` are absolute start offsets (world units), each in [0, step length).
    """
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    n = d.shape[0]
    o = np.broadcast_to(np.asarray(origins, dtype=np.float64), (n, 3))
    t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), (n,))
    t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), (n,))
    offsets = np.broadcast_to(np.asarray(offsets, dtype=np.float64), (n,))

    hit = t_max > t_min
    step = np.where(hit, (t_max - t_min) / config.n_steps, 0.0)
    if np.any(hit & ((offsets < 0) | (offsets >= np.where(hit, step, np.inf)))):
        raise ValueError("start offsets must lie in [0, step_length)")

    sun = np.asarray(medium.sun_direction)
    phase = transport.hg_phase(medium.hg_g, np.clip(d @ sun, -1.0, 1.0))
    alpha_k = medium.absorption
    analytic = config.integration_mode == "analytic"
    early_out = config.alpha_early_out < 1.0

    T = np.ones(n)
    color = np.zeros((n, 3))
    w_sum = np.zeros(n)
    wt_sum = np.zeros(n)
    steps_taken = np.zeros(n, dtype=np.int64)
    active = hit.copy()
    trace = []

    for i in range(config.n_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        t = t_min[idx] + offsets[idx] + i * step[idx]
        pts = o[idx] + d[idx] * t[:, None]
        rho = noisefield.sample_density(field, pts)
        if counter is not None:
            counter.density_samples += idx.size
        sun_t = light_march(field, medium, pts, config.n_light_steps, counter)
        L = transport.lighting_term(sun_t, phase[idx], medium)
        if analytic:
            # In-scattered source is density weighted, as in the naive update,
            # so both modes converge to the same image as steps shrink.
            c = transport.scattering_step_analytic(T[idx], L * rho[:, None], rho, alpha_k, step[idx])
        else:
            c = transport.scattering_step_naive(T[idx], L, rho, alpha_k, step[idx])
        color[idx] += c.delta_scattering
        lum = transport.luminance(c.delta_scattering)
        w_sum[idx] += lum
        wt_sum[idx] += lum * t
        T[idx] *= c.transmittance_factor
        steps_taken[idx] += 1
        if record_transmittance:
            trace.append(T.copy())
        if early_out:
            active[idx] = (1.0 - T[idx]) < config.alpha_early_out

    with np.errstate(invalid="ignore", divide="ignore"):
        depth = np.where(w_sum > 0, wt_sum / np.where(w_sum > 0, w_sum, 1.0), t_max)
    depth = np.clip(depth, t_min, t_max)
    return MarchResult(color, 1.0 - T, depth, steps_taken, trace)


def march_primary(field: DensityField, medium: MediumParams, ray: Ray, config: RaymarchConfig,
                  start_offset: float = 0.0, counter: Optional[SampleCounter] = None) -> PixelSample:
    r = march_rays(field, medium, ray.origin, ray.direction, ray.t_min, ray.t_max, config,
                   start_offset, counter)
    return PixelSample(tuple(float(x) for x in r.color[0]), float(r.alpha[0]), float(r.mean_depth[0]))
