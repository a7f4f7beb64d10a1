"""YAML scene/experiment configuration.

Schema (all sections except ``field`` and ``camera`` are optional)::

    field:            # kind: procedural | constant | slab | sphere
      kind: procedural
      bounds: {min: [x, y, z], max: [x, y, z]}
      seed: 7
      frequency: 0.35       # lattice cells per world unit, first octave
      octaves: 4
      coverage: 0.5         # 0 empty .. 1 everything above zero noise
      edge_falloff: 0.0     # width of the density fade at the bounds faces
      # constant: value | slab: y_min, y_max, density | sphere: center, radius, density
    medium:
      absorption: 1.0
      hg_g: 0.2             # |g| < 1
      sun_direction: [0, 1, 0]   # toward the sun, normalized on load
      sun_radiance: [10, 10, 10]
      ambient_radiance: [0.5, 0.5, 0.5]
    camera:
      position: [x, y, z]
      target: [x, y, z]
      up: [0, 1, 0]
      vertical_fov_deg: 60
      aspect: null          # defaults to display width / height
    render:
      display_resolution: [256, 256]
      cloud_buffer_scale: full   # full | half | quarter
      background: [0, 0, 0]
    raymarch:
      n_steps: 128
      n_light_steps: 6
      integration_mode: analytic # naive | analytic
      jitter_mode: "off"         # off | per_pixel | per_frame_uniform
      alpha_early_out: 0.9999    # 1.0 disables early termination
      jitter_seed: 0
    taa:
      enabled: false
      history_weight: 0.9
      clamp_mode: minmax_3x3     # none | minmax_3x3
      feedback_on_reproject_miss: use_current
    experiments:                 # optional; bench uses the six default rows otherwise
      - name: half_8
        n_frames: 1
        reference: full_128
        set: {raymarch.n_steps: 8, render.cloud_buffer_scale: half}

Unknown keys are rejected. ``set`` entries and command-line overrides use
dotted paths into this schema.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import evalbench
from .camera import CameraPose
from .noisefield import ConstantField, SlabField, SphereField, VolumeBounds, make_procedural_clouds
from .raymarch import DEFAULT_EARLY_OUT, RaymarchConfig
from .renderer import SceneConfig
from .temporal import TaaConfig
from .transport import MediumParams

Vec3 = tuple[float, float, float]


class ConfigError(Exception):
    """Invalid configuration; the message carries file, line and field context."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BoundsModel(_Strict):
    min: Vec3
    max: Vec3


class ProceduralModel(_Strict):
    kind: Literal["procedural"] = "procedural"
    bounds: BoundsModel
    seed: int = 0
    frequency: float = 1.0
    octaves: int = 4
    coverage: float = 0.5
    edge_falloff: float = 0.0


class ConstantModel(_Strict):
    kind: Literal["constant"]
    bounds: BoundsModel
    value: float


class SlabModel(_Strict):
    kind: Literal["slab"]
    bounds: BoundsModel
    y_min: float
    y_max: float
    density: float


class SphereModel(_Strict):
    kind: Literal["sphere"]
    bounds: BoundsModel
    center: Vec3
    radius: float
    density: float


FieldModel = Annotated[Union[ProceduralModel, ConstantModel, SlabModel, SphereModel],
                       Field(discriminator="kind")]


class MediumModel(_Strict):
    absorption: float = 1.0
    hg_g: float = 0.2
    sun_direction: Vec3 = (0.0, 1.0, 0.0)
    sun_radiance: Vec3 = (10.0, 10.0, 10.0)
    ambient_radiance: Vec3 = (0.5, 0.5, 0.5)

    @field_validator("hg_g")
    @classmethod
    def _g_range(cls, g):
        if not abs(g) < 1.0:
            raise ValueError(f"hg_g must satisfy |g| < 1, got {g}")
        return g

    @field_validator("absorption")
    @classmethod
    def _positive(cls, a):
        if not a > 0:
            raise ValueError("absorption must be > 0")
        return a


class CameraModel(_Strict):
    position: Vec3
    target: Vec3
    up: Vec3 = (0.0, 1.0, 0.0)
    vertical_fov_deg: float = 60.0
    aspect: Optional[float] = None


class RenderModel(_Strict):
    display_resolution: tuple[int, int] = (256, 256)
    cloud_buffer_scale: Literal["full", "half", "quarter"] = "full"
    background: Vec3 = (0.0, 0.0, 0.0)


class RaymarchModel(_Strict):
    n_steps: int = 128
    n_light_steps: int = 6
    integration_mode: Literal["naive", "analytic"] = "analytic"
    jitter_mode: Literal["off", "per_pixel", "per_frame_uniform"] = "off"
    alpha_early_out: float = DEFAULT_EARLY_OUT
    jitter_seed: int = 0

    @field_validator("jitter_mode", mode="before")
    @classmethod
    def _yaml_off(cls, v):
        # YAML 1.1 reads a bare `off` as boolean false.
        return "off" if v is False else v


class TaaModel(_Strict):
    enabled: bool = False
    history_weight: float = 0.9
    clamp_mode: Literal["none", "minmax_3x3"] = "minmax_3x3"
    feedback_on_reproject_miss: Literal["use_current"] = "use_current"


class ExperimentModel(_Strict):
    name: str
    n_frames: int = 1
    reference: Optional[str] = None
    set: dict[str, Any] = {}


class ConfigModel(_Strict):
    field: FieldModel
    medium: MediumModel = MediumModel()
    camera: CameraModel
    render: RenderModel = RenderModel()
    raymarch: RaymarchModel = RaymarchModel()
    taa: TaaModel = TaaModel()
    experiments: Optional[list[ExperimentModel]] = None


@dataclass
class LoadedConfig:
    model: ConfigModel
    scene: SceneConfig
    experiments: Optional[list]  # list of ExperimentSpec, or None when not configured
    source: str = "<config>"


# ---------------------------------------------------------------- building


def build_field(m):
    bounds = VolumeBounds(m.bounds.min, m.bounds.max)
    if m.kind == "procedural":
        return make_procedural_clouds(m.seed, m.frequency, m.octaves, m.coverage, bounds,
                                      m.edge_falloff)
    if m.kind == "constant":
        return ConstantField(m.value, bounds)
    if m.kind == "slab":
        return SlabField(m.y_min, m.y_max, m.density, bounds)
    return SphereField(m.center, m.radius, m.density, bounds)


def build_scene(m: ConfigModel, lines: Optional[dict] = None, source: str = "") -> SceneConfig:
    """Turn a validated model into runtime objects; raises ConfigError naming the section."""
    lines = lines or {}

    def section(name, fn):
        try:
            return fn()
        except ValueError as exc:
            where = f"{source}:{lines[(name,)]}: " if (name,) in lines else ""
            raise ConfigError(f"{where}{name}: {exc}") from None

    w, h = m.render.display_resolution
    field = section("field", lambda: build_field(m.field))

    def medium():
        sun = m.medium.sun_direction
        norm = math.sqrt(sum(c * c for c in sun))
        if norm == 0:
            raise ValueError("sun_direction must be non-zero")
        return MediumParams(m.medium.absorption, m.medium.hg_g, tuple(c / norm for c in sun),
                            m.medium.sun_radiance, m.medium.ambient_radiance)

    med = section("medium", medium)
    cam = section("camera", lambda: CameraPose.look_at(
        m.camera.position, m.camera.target, m.camera.up,
        math.radians(m.camera.vertical_fov_deg),
        m.camera.aspect if m.camera.aspect is not None else (w / h if h else 1.0)))
    rm = section("raymarch", lambda: RaymarchConfig(**m.raymarch.model_dump()))
    taa = section("taa", lambda: TaaConfig(**m.taa.model_dump()))
    return section("render", lambda: SceneConfig(
        field, med, cam, background=m.render.background, display_resolution=(w, h),
        cloud_buffer_scale=m.render.cloud_buffer_scale, raymarch=rm, taa=taa))


# ---------------------------------------------------------------- overrides


def parse_override(text: str) -> tuple[str, Any]:
    """Split ``a.b.c=value``; the value is read as YAML (so 8 -> int, [1,2] -> list)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key or any(not part for part in key.split(".")):
        raise ConfigError(f"override {text!r} has an empty key segment")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: value is not valid YAML ({exc})") from None
    return key, value


def apply_override(data: dict, key: str, value) -> None:
    parts = key.split(".")
    node = data
    for i, part in enumerate(parts[:-1]):
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"override {key!r}: {'.'.join(parts[:i + 1])} is not a section")
        node = child
    node[parts[-1]] = value


# ---------------------------------------------------------------- loading


def _line_map(text: str) -> dict:
    """Dotted key paths -> 1-based line numbers, from the YAML node tree."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                lines[p] = k.start_mark.line + 1
                walk(v, p)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                p = path + (i,)
                lines[p] = v.start_mark.line + 1
                walk(v, p)

    if root is not None:
        walk(root, ())
    return lines


def _describe(err: ValidationError, lines: dict, source: str) -> str:
    msgs = []
    for e in err.errors():
        path = ()
        for part in e["loc"]:
            # Discriminated unions add the tag to loc; skip parts the file does not have.
            if path + (part,) in lines:
                path = path + (part,)
        dotted = ".".join(str(p) for p in e["loc"])
        where = f"{source}:{lines[path]}" if path in lines else source
        msgs.append(f"{where}: {dotted}: {e['msg']}")
    return "\n".join(msgs)


def _validate(data, lines, source) -> ConfigModel:
    try:
        return ConfigModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_describe(exc, lines, source)) from None


def _base_dict(model: ConfigModel) -> dict:
    d = model.model_dump(mode="python")
    d.pop("experiments", None)
    return d


def build_experiments(model: ConfigModel, base_scene: SceneConfig) -> Optional[list]:
    if model.experiments is None:
        return None
    specs = []
    base = _base_dict(model)
    for i, exp in enumerate(model.experiments):
        data = copy.deepcopy(base)
        for key, value in exp.set.items():
            if key.split(".")[0] == "experiments":
                raise ConfigError(f"experiments[{i}] ({exp.name}): cannot override experiments")
            apply_override(data, key, value)
        sub = _validate(data, {}, f"experiments[{i}] ({exp.name})")
        try:
            scene = build_scene(sub) if exp.set else base_scene
            specs.append(evalbench.ExperimentSpec(exp.name, scene, exp.n_frames, exp.reference))
        except (ConfigError, ValueError) as exc:
            raise ConfigError(f"experiments[{i}] ({exp.name}): {exc}") from None
    try:
        evalbench.resolve_order(specs)
    except ValueError as exc:
        raise ConfigError(f"experiments: {exc}") from None
    return specs


def loads_config(text: str, overrides=(), source: str = "<config>") -> LoadedConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections")
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        apply_override(data, key, value)
    lines = _line_map(text)
    model = _validate(data, lines, source)
    scene = build_scene(model, lines, source)
    return LoadedConfig(model, scene, build_experiments(model, scene), source)


def load_config(path, overrides=()) -> LoadedConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
    return loads_config(text, overrides, str(p))


def dump_config(model: ConfigModel) -> str:
    """Serialize a model back to YAML that loads to an identical configuration."""
    data = model.model_dump(mode="json", exclude_none=True)
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)


def default_scene_path() -> Path:
    return Path(__file__).with_name("scenes") / "canonical.yaml"
