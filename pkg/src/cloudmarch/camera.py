"""Pinhole camera poses and primary-ray generation.

Conventions: right-handed world, camera looks along ``forward``; the view
matrix maps ``forward`` to -z as in OpenGL. Pixel (x, y) has its center at
normalized coordinates ``((x + 0.5) / W, (y + 0.5) / H)`` with y growing
downward, so uv (0, 0) is the top-left image corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

Vec3 = tuple[float, float, float]

NEAR = 0.05
FAR = 1.0e4


def _normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


@dataclass(frozen=True)
class CameraPose:
    position: Vec3
    right: Vec3
    up: Vec3
    forward: Vec3
    vertical_fov: float
    aspect: float

    def __post_init__(self):
        for name in ("position", "right", "up", "forward"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        basis = np.array([self.right, self.up, self.forward])
        if np.max(np.abs(basis @ basis.T - np.eye(3))) > 1e-6:
            raise ValueError("camera basis (right, up, forward) must be orthonormal")
        if not 0 < self.vertical_fov < math.pi:
            raise ValueError("vertical_fov must lie in (0, pi) radians")
        if not self.aspect > 0:
            raise ValueError("aspect must be > 0")

    @classmethod
    def look_at(cls, position, target, up=(0.0, 1.0, 0.0), vertical_fov=math.radians(60.0),
                aspect=1.0) -> "CameraPose":
        fwd = _normalize(np.subtract(target, position))
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            raise ValueError("up vector is parallel to the viewing direction")
        right = _normalize(right)
        true_up = np.cross(right, fwd)
        return cls(tuple(position), tuple(right), tuple(true_up), tuple(fwd),
                   float(vertical_fov), float(aspect))

    @property
    def tan_half_fov(self) -> float:
        return math.tan(0.5 * self.vertical_fov)

    @cached_property
    def view(self) -> np.ndarray:
        r, u, f = (np.asarray(v) for v in (self.right, self.up, self.forward))
        p = np.asarray(self.position)
        m = np.eye(4)
        m[0, :3], m[1, :3], m[2, :3] = r, u, -f
        m[:3, 3] = -m[:3, :3] @ p
        return m

    @cached_property
    def projection(self) -> np.ndarray:
        t = self.tan_half_fov
        m = np.zeros((4, 4))
        m[0, 0] = 1.0 / (t * self.aspect)
        m[1, 1] = 1.0 / t
        m[2, 2] = -(FAR + NEAR) / (FAR - NEAR)
        m[2, 3] = -2.0 * FAR * NEAR / (FAR - NEAR)
        m[3, 2] = -1.0
        return m

    @cached_property
    def view_projection(self) -> np.ndarray:
        return self.projection @ self.view


def pixel_ndc(xs, ys, resolution) -> tuple[np.ndarray, np.ndarray]:
    w, h = resolution
    ndc_x = 2.0 * (np.asarray(xs, dtype=np.float64) + 0.5) / w - 1.0
    ndc_y = 1.0 - 2.0 * (np.asarray(ys, dtype=np.float64) + 0.5) / h
    return ndc_x, ndc_y


def ray_directions(camera: CameraPose, xs, ys, resolution) -> np.ndarray:
    """Unit view-ray directions through the centers of pixels (xs, ys)."""
    ndc_x, ndc_y = pixel_ndc(xs, ys, resolution)
    t = camera.tan_half_fov
    d = (np.asarray(camera.forward)
         + (ndc_x * t * camera.aspect)[..., None] * np.asarray(camera.right)
         + (ndc_y * t)[..., None] * np.asarray(camera.up))
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def generate_ray(camera: CameraPose, pixel, resolution) -> tuple[np.ndarray, np.ndarray]:
    """Origin and unit direction of the ray through the center of ``pixel``."""
    x, y = pixel
    w, h = resolution
    if not (0 <= x < w and 0 <= y < h):
        raise ValueError(f"pixel {pixel} outside resolution {resolution}")
    return np.asarray(camera.position), ray_directions(camera, x, y, resolution)


def image_rays(camera: CameraPose, resolution) -> tuple[np.ndarray, np.ndarray]:
    """Directions for every pixel, shape (H, W, 3), plus the shared origin."""
    w, h = resolution
    ys, xs = np.mgrid[0:h, 0:w]
    return np.asarray(camera.position), ray_directions(camera, xs, ys, resolution)
