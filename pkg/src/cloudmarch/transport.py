"""Single-scattering transport math for the raymarcher.

Functions accept scalars or numpy arrays and broadcast. Radiance quantities
are linear RGB with a trailing axis of length 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this optical thickness per step the analytic factor switches to its
# Taylor expansion to avoid cancellation in 1 - exp(-u).
TAYLOR_EPS = 1e-4

RGB = tuple[float, float, float]


def _rgb(v, name: str) -> RGB:
    a = tuple(float(x) for x in v)
    if len(a) != 3 or not all(math.isfinite(x) and x >= 0 for x in a):
        raise ValueError(f"{name} must be a finite non-negative RGB triple, got {v!r}")
    return a


@dataclass(frozen=True)
class MediumParams:
    absorption: float
    hg_g: float
    sun_direction: tuple[float, float, float]
    sun_radiance: RGB
    ambient_radiance: RGB

    def __post_init__(self):
        if not self.absorption > 0:
            raise ValueError(f"absorption must be > 0, got {self.absorption}")
        if not abs(self.hg_g) < 1:
            raise ValueError(f"hg_g must satisfy |g| < 1, got {self.hg_g}")
        d = tuple(float(x) for x in self.sun_direction)
        if len(d) != 3 or abs(math.sqrt(sum(x * x for x in d)) - 1.0) > 1e-6:
            raise ValueError(f"sun_direction must be a unit 3-vector, got {self.sun_direction!r}")
        object.__setattr__(self, "sun_direction", d)
        object.__setattr__(self, "sun_radiance", _rgb(self.sun_radiance, "sun_radiance"))
        object.__setattr__(self, "ambient_radiance", _rgb(self.ambient_radiance, "ambient_radiance"))


@dataclass(frozen=True)
class StepContribution:
    delta_scattering: np.ndarray
    transmittance_factor: np.ndarray


def _nonneg(name: str, x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if np.any(a < 0) or np.any(np.isnan(a)):
        raise ValueError(f"{name} must be >= 0")
    return a


def _positive(name: str, x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if np.any(~(a > 0)):
        raise ValueError(f"{name} must be > 0")
    return a


def _unit_interval(name: str, x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if np.any(~((a >= 0) & (a <= 1))):
        raise ValueError(f"{name} must lie in [0, 1]")
    return a


def transmittance_factor(rho, alpha, dist):
    """Beer-Lambert attenuation exp(-rho * alpha * dist)."""
    rho = _nonneg("rho", rho)
    alpha = _positive("alpha", alpha)
    dist = _nonneg("dist", dist)
    return np.exp(-rho * alpha * dist)


def hg_phase(g, cos_theta):
    """Henyey-Greenstein phase function, normalized over the sphere (1/sr)."""
    g = np.asarray(g, dtype=np.float64)
    cos_theta = np.asarray(cos_theta, dtype=np.float64)
    if np.any(~(np.abs(g) < 1)):
        raise ValueError("hg_g must satisfy |g| < 1")
    if np.any(np.abs(cos_theta) > 1):
        raise ValueError("cos_theta must lie in [-1, 1]")
    g2 = g * g
    denom = 1.0 + g2 - 2.0 * g * cos_theta
    return (1.0 - g2) / (4.0 * np.pi * denom * np.sqrt(denom))


def lighting_term(sun_transmittance, phase, medium: MediumParams) -> np.ndarray:
    """In-scattered lighting ``sun * sun_transmittance * phase + ambient``."""
    ts = _unit_interval("sun_transmittance", sun_transmittance)
    ph = _nonneg("phase", phase)
    sun = np.asarray(medium.sun_radiance)
    amb = np.asarray(medium.ambient_radiance)
    return sun * (ts * ph)[..., None] + amb


def analytic_factor(rho, alpha, dist):
    """Integral of exp(-rho*alpha*x) for x in [0, dist], i.e. (1 - e^{-u}) / (rho*alpha).

    For ``u = rho*alpha*dist < TAYLOR_EPS`` it evaluates
    ``dist * (1 - u/2 + u**2/6)`` instead, which also covers rho = 0.
    """
    rho = _nonneg("rho", rho)
    alpha = _positive("alpha", alpha)
    dist = _nonneg("dist", dist)
    k = rho * alpha
    u = k * dist
    small = u < TAYLOR_EPS
    safe_k = np.where(small, 1.0, k)
    exact = -np.expm1(-u) / safe_k
    series = dist * (1.0 - u / 2.0 + u * u / 6.0)
    return np.where(small, series, exact)


def scattering_step_naive(T, L, rho, alpha, dist) -> StepContribution:
    """Riemann update: transmittance held at ``T`` across the whole step."""
    T = _unit_interval("T", T)
    rho = _nonneg("rho", rho)
    dist = _nonneg("dist", dist)
    L = np.asarray(L, dtype=np.float64)
    weight = T * rho * dist
    return StepContribution(
        delta_scattering=L * weight[..., None],
        transmittance_factor=transmittance_factor(rho, alpha, dist),
    )


def scattering_step_analytic(T0, L, rho, alpha, dist) -> StepContribution:
    """Exact update for density constant over the step: T0 * L * (1 - e^{-rho alpha D}) / (rho alpha)."""
    T0 = _unit_interval("T0", T0)
    L = np.asarray(L, dtype=np.float64)
    weight = T0 * analytic_factor(rho, alpha, dist)
    return StepContribution(
        delta_scattering=L * weight[..., None],
        transmittance_factor=transmittance_factor(rho, alpha, dist),
    )


LUMA = np.array([0.2126, 0.7152, 0.0722])


def luminance(rgb) -> np.ndarray:
    """Rec. 709 relative luminance of linear RGB along the last axis."""
    return np.asarray(rgb, dtype=np.float64) @ LUMA
