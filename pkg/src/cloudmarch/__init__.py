"""Deterministic CPU volumetric-cloud raymarcher.

Analytic per-step scattering integration, per-pixel jittered march starts and
a temporal anti-aliasing resolve over a reduced-resolution cloud buffer, plus
a benchmark harness for comparing the configurations.
"""

from .camera import CameraPose
from .noisefield import (
    ConstantField,
    ProceduralField,
    SlabField,
    SphereField,
    VolumeBounds,
    make_procedural_clouds,
    sample_density,
)
from .raymarch import RaymarchConfig, march_primary
from .renderer import SceneConfig, render_frame, render_sequence
from .temporal import TaaConfig, taa_resolve
from .transport import MediumParams

__version__ = "0.1.0"

__all__ = [
    "CameraPose", "ConstantField", "ProceduralField", "SlabField", "SphereField", "VolumeBounds",
    "make_procedural_clouds", "sample_density", "RaymarchConfig", "march_primary", "SceneConfig",
    "render_frame", "render_sequence", "TaaConfig", "taa_resolve", "MediumParams",
]
