"""Cloud density fields.

A field maps world positions to a density ``rho >= 0`` and is zero outside its
axis-aligned bounds. Analytic fields (constant, slab, sphere) exist so the
transport code can be checked against closed forms; the procedural field is a
seeded fractal sum of hashed value noise with a coverage remap.

All fields are frozen dataclasses and evaluation is a pure function of the
field and the query points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numba
import numpy as np

from ._hash import MASK32, hash4_jit

Vec3 = tuple[float, float, float]


def _vec3(v) -> Vec3:
    a = tuple(float(x) for x in v)
    if len(a) != 3:
        raise ValueError(f"expected a 3-vector, got {v!r}")
    return a


@dataclass(frozen=True)
class VolumeBounds:
    min_corner: Vec3
    max_corner: Vec3

    def __post_init__(self):
        lo, hi = _vec3(self.min_corner), _vec3(self.max_corner)
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError(f"max_corner {hi} must exceed min_corner {lo} componentwise")

    def contains(self, points: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.min_corner)
        hi = np.asarray(self.max_corner)
        return np.all((points >= lo) & (points <= hi), axis=-1)


@dataclass(frozen=True)
class ConstantField:
    value: float
    bounds: VolumeBounds
    kind = "constant"

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("constant density must be >= 0")


@dataclass(frozen=True)
class SlabField:
    """Uniform density between two altitudes (world y)."""

    y_min: float
    y_max: float
    density: float
    bounds: VolumeBounds
    kind = "slab"

    def __post_init__(self):
        if not self.y_max > self.y_min:
            raise ValueError("slab requires y_max > y_min")
        if not self.density >= 0:
            raise ValueError("slab density must be >= 0")


@dataclass(frozen=True)
class SphereField:
    center: Vec3
    radius: float
    density: float
    bounds: VolumeBounds
    kind = "sphere"

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center))
        if not self.radius > 0:
            raise ValueError("sphere radius must be > 0")
        if not self.density >= 0:
            raise ValueError("sphere density must be >= 0")


@dataclass(frozen=True)
class ProceduralField:
    """fBm value noise remapped by a coverage threshold, clamped to [0, 1].

    ``edge_falloff`` > 0 fades density smoothly to zero over that distance
    inside every face of the bounds, so clouds do not end on hard box walls.
    """

    seed: int
    frequency: float
    octaves: int
    coverage: float
    bounds: VolumeBounds
    edge_falloff: float = 0.0
    kind = "procedural"

    def __post_init__(self):
        if int(self.octaves) != self.octaves or self.octaves < 1:
            raise ValueError(f"octaves must be an integer >= 1, got {self.octaves}")
        if not self.frequency > 0:
            raise ValueError(f"frequency must be > 0, got {self.frequency}")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage must lie in [0, 1], got {self.coverage}")
        if not self.edge_falloff >= 0.0:
            raise ValueError(f"edge_falloff must be >= 0, got {self.edge_falloff}")


DensityField = Union[ConstantField, SlabField, SphereField, ProceduralField]


def make_procedural_clouds(
    seed: int, frequency: float, octaves: int, coverage: float, bounds: VolumeBounds,
    edge_falloff: float = 0.0,
) -> ProceduralField:
    return ProceduralField(int(seed), float(frequency), int(octaves), float(coverage), bounds,
                           float(edge_falloff))


@numba.njit(inline="always")
def _lattice(ix, iy, iz, seed):
    h = hash4_jit(
        np.uint64(ix & 0xFFFFFFFF),
        np.uint64(iy & 0xFFFFFFFF),
        np.uint64(iz & 0xFFFFFFFF),
        seed & MASK32,
    )
    return np.float64(h >> np.uint64(8)) * (1.0 / 16777216.0)


@numba.njit(cache=True)
def _fbm_kernel(points, seed, frequency, octaves, out):
    # Trilinear value noise with smoothstep weights; lacunarity 2, gain 1/2,
    # each octave on its own lattice (seed + octave). Result lies in [0, 1).
    for n in range(points.shape[0]):
        total = 0.0
        norm = 0.0
        amp = 1.0
        freq = frequency
        for o in range(octaves):
            s = np.uint64(seed + o)
            x = points[n, 0] * freq
            y = points[n, 1] * freq
            z = points[n, 2] * freq
            fx = np.floor(x)
            fy = np.floor(y)
            fz = np.floor(z)
            ix = np.int64(fx)
            iy = np.int64(fy)
            iz = np.int64(fz)
            tx = x - fx
            ty = y - fy
            tz = z - fz
            tx = tx * tx * (3.0 - 2.0 * tx)
            ty = ty * ty * (3.0 - 2.0 * ty)
            tz = tz * tz * (3.0 - 2.0 * tz)
            c000 = _lattice(ix, iy, iz, s)
            c100 = _lattice(ix + 1, iy, iz, s)
            c010 = _lattice(ix, iy + 1, iz, s)
            c110 = _lattice(ix + 1, iy + 1, iz, s)
            c001 = _lattice(ix, iy, iz + 1, s)
            c101 = _lattice(ix + 1, iy, iz + 1, s)
            c011 = _lattice(ix, iy + 1, iz + 1, s)
            c111 = _lattice(ix + 1, iy + 1, iz + 1, s)
            a = c000 + (c100 - c000) * tx
            b = c010 + (c110 - c010) * tx
            c = c001 + (c101 - c001) * tx
            d = c011 + (c111 - c011) * tx
            e = a + (b - a) * ty
            f = c + (d - c) * ty
            total += amp * (e + (f - e) * tz)
            norm += amp
            amp *= 0.5
            freq *= 2.0
        out[n] = total / norm


def fbm(points: np.ndarray, seed: int, frequency: float, octaves: int) -> np.ndarray:
    """Raw fractal value noise in [0, 1) at ``points`` of shape (N, 3)."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty(pts.shape[0])
    _fbm_kernel(pts, np.int64(seed) & 0xFFFFFFFF, float(frequency), int(octaves), out)
    return out


def coverage_remap(noise: np.ndarray, coverage: float) -> np.ndarray:
    """clamp((noise - (1 - coverage)) / coverage, 0, 1); zero coverage gives zero."""
    if coverage <= 0.0:
        return np.zeros_like(noise)
    with np.errstate(over="ignore"):
        return np.clip((noise - (1.0 - coverage)) / coverage, 0.0, 1.0)


def edge_weight(points: np.ndarray, bounds: VolumeBounds, margin: float) -> np.ndarray:
    """Smoothstep of the distance to the nearest face of ``bounds`` over ``margin``."""
    lo = np.asarray(bounds.min_corner)
    hi = np.asarray(bounds.max_corner)
    d = np.minimum(points - lo, hi - points).min(axis=-1)
    x = np.clip(d / margin, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def sample_density(field: DensityField, p):
    """Density at a point, or at each row of an (..., 3) array of points.

    Returns a Python float for a single point and an array of shape ``p.shape[:-1]``
    otherwise. Points outside ``field.bounds`` have density 0.
    """
    pts = np.asarray(p, dtype=np.float64)
    scalar = pts.ndim == 1
    flat = pts.reshape(-1, 3)
    inside = field.bounds.contains(flat)
    rho = np.zeros(flat.shape[0])

    if isinstance(field, ConstantField):
        rho[inside] = field.value
    elif isinstance(field, SlabField):
        y = flat[:, 1]
        rho[inside & (y >= field.y_min) & (y <= field.y_max)] = field.density
    elif isinstance(field, SphereField):
        d2 = np.sum((flat - np.asarray(field.center)) ** 2, axis=1)
        rho[inside & (d2 <= field.radius**2)] = field.density
    elif isinstance(field, ProceduralField):
        if inside.any() and field.coverage > 0.0:
            pts_in = flat[inside]
            dens = coverage_remap(fbm(pts_in, field.seed, field.frequency, field.octaves),
                                  field.coverage)
            if field.edge_falloff > 0.0:
                dens *= edge_weight(pts_in, field.bounds, field.edge_falloff)
            rho[inside] = dens
    else:
        raise TypeError(f"unknown density field {type(field).__name__}")

    if scalar:
        return float(rho[0])
    return rho.reshape(pts.shape[:-1])
