"""Dataclass configuration for every pipeline stage.

A run is described by one PipelineConfig, loadable from a JSON file with CLI
overrides on top. Its canonical hash is recorded in every manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from matscene.errors import ConfigurationError, ParameterError


@dataclass
class RegionMapConfig:
    """Controls for soft multi-region map sampling."""

    k_min: int = 2
    k_max: int = 4
    min_ramp_gap: float = 0.05  # keeps maps soft; degenerate hard steps resampled
    area_min: float = 0.02
    area_max: float = 0.98
    max_resamples: int = 10

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise ParameterError(f"bad region count range [{self.k_min}, {self.k_max}]")


@dataclass
class ExtractionConfig:
    """Grid-statistics texture mining parameters."""

    cell_size: int = 40
    min_region_cells: int = 6  # regions strictly larger than this many cells per side
    js_threshold: float = 0.5
    histogram_bins: int = 32
    std_min: float = 0.02
    mean_min: float = 0.05
    mean_max: float = 0.95

    def __post_init__(self):
        if self.cell_size < 8:
            raise ParameterError(f"cell_size must be >= 8, got {self.cell_size}")
        if self.min_region_cells < 2:
            raise ParameterError(f"min_region_cells must be >= 2, got {self.min_region_cells}")
        if not 0.0 < self.js_threshold <= 1.0:
            raise ParameterError(f"js_threshold must be in (0, 1], got {self.js_threshold}")
        if self.histogram_bins < 8:
            raise ParameterError(f"histogram_bins must be >= 8, got {self.histogram_bins}")


@dataclass
class AugmentConfig:
    """Random property-map augmentation ranges."""

    uniform_prob: float = 0.25  # chance a property collapses to one random scalar
    scale_range: tuple[float, float] = (0.5, 1.5)
    shift_range: tuple[float, float] = (-0.3, 0.3)
    ramp_prob: float = 0.5
    invert_prob: float = 0.5
    blur_sigma_max: float = 2.0
    normal_strength_range: tuple[float, float] = (0.5, 4.0)


@dataclass
class Scene2DConfig:
    """2D composition controls."""

    shadow_prob: float = 0.5
    shadow_strength_range: tuple[float, float] = (0.2, 0.8)
    linear_blend: bool = True  # blend in linear RGB, re-encode to sRGB on output
    target_size: tuple[int, int] | None = None  # (height, width); None keeps source size


@dataclass
class Scene3DConfig:
    """3D scene randomization controls."""

    primary_objects: tuple[int, int] = (1, 3)
    distractor_objects: tuple[int, int] = (0, 3)
    p_ground: float = 0.5
    p_lights: float = 0.3
    lights_range: tuple[int, int] = (1, 2)
    light_power_range: tuple[float, float] = (50.0, 500.0)
    p_textureless: float = 0.2
    camera_radius_range: tuple[float, float] = (2.5, 4.0)
    focal_length_range: tuple[float, float] = (35.0, 85.0)
    look_jitter: float = 0.3
    resolution: tuple[int, int] = (768, 768)
    samples: int = 64


@dataclass
class MetricsConfig:
    """Benchmark scoring options."""

    # "any_point": a triplet counts as soft when any of its points belongs to a
    # group with a declared partial-similarity relation. "anchor_relation"
    # requires the anchor's relation to one compared point to be the partial one.
    soft_mode: str = "any_point"
    points_per_segment: int = 5

    def __post_init__(self):
        if self.soft_mode not in ("any_point", "anchor_relation"):
            raise ParameterError(f"unknown soft_mode {self.soft_mode!r}")


@dataclass
class PipelineConfig:
    """Root configuration for a full corpus run."""

    corpus_roots: list[str] = field(default_factory=list)
    output_root: str = "out"
    seed: int = 0
    workers: int = 1
    max_error_rate: float = 0.25  # partial-failure rate above which exit code is 2
    region_map: RegionMapConfig = field(default_factory=RegionMapConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    scene2d: Scene2DConfig = field(default_factory=Scene2DConfig)
    scene3d: Scene3DConfig = field(default_factory=Scene3DConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def to_json_dict(self) -> dict:
        return _asdict_plain(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "PipelineConfig":
        return _from_dict(cls, data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"config {path} must hold a JSON object")
        return cls.from_json_dict(data)

    def config_hash(self) -> str:
        data = self.to_json_dict()
        data.pop("workers")  # execution detail; identical runs must hash identically
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _asdict_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _asdict_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_asdict_plain(v) for v in obj]
    if isinstance(obj, list):
        return [_asdict_plain(v) for v in obj]
    return obj


def _from_dict(cls, data: dict):
    if not isinstance(data, dict):
        raise ConfigurationError(f"expected object for {cls.__name__}, got {type(data).__name__}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        kwargs[f.name] = _coerce_field(cls, f.name, data[f.name])
    unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ConfigurationError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    try:
        return cls(**kwargs)
    except ParameterError:
        raise
    except TypeError as exc:
        raise ConfigurationError(f"bad config for {cls.__name__}: {exc}") from exc


_NESTED = {
    "region_map": RegionMapConfig,
    "extraction": ExtractionConfig,
    "augment": AugmentConfig,
    "scene2d": Scene2DConfig,
    "scene3d": Scene3DConfig,
    "metrics": MetricsConfig,
}

_TUPLE_FIELDS = {
    "scale_range", "shift_range", "normal_strength_range", "shadow_strength_range",
    "target_size", "primary_objects", "distractor_objects", "lights_range",
    "light_power_range", "camera_radius_range", "focal_length_range", "resolution",
}


def _coerce_field(cls, name: str, value):
    if name in _NESTED and isinstance(value, dict):
        return _from_dict(_NESTED[name], value)
    if name in _TUPLE_FIELDS and isinstance(value, list):
        return tuple(value)
    return value
