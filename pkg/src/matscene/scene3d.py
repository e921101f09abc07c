"""Declarative 3D scene descriptors.

A descriptor is renderer-agnostic JSON: meshes with transforms, one soft
region map UV-wrapped onto the primary objects with a region-to-material
table, an HDRI environment, optional ground/distractors/lights, and a camera.
Rendering specifics live in the external bridge, which consumes this schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from matscene.config import Scene3DConfig
from matscene.errors import ConfigurationError, ParameterError
from matscene.imagemaps import SoftRegionMap
from matscene.seeding import rng_for

SCHEMA_VERSION = 1

UNIFORM_PROPS = ("roughness", "metallic", "transmission", "specular")


@dataclass
class AssetEntry:
    id: str
    path: str
    license: str = ""


@dataclass
class AssetIndex:
    """Catalogs of meshes, HDRIs and materials available to the generator."""

    meshes: dict[str, AssetEntry] = field(default_factory=dict)
    hdris: dict[str, AssetEntry] = field(default_factory=dict)
    materials: dict[str, AssetEntry] = field(default_factory=dict)

    @classmethod
    def from_json_dict(cls, data: dict) -> "AssetIndex":
        index = cls()
        for catalog in ("meshes", "hdris", "materials"):
            for entry in data.get(catalog, []):
                asset = AssetEntry(id=entry["id"], path=entry["path"],
                                   license=entry.get("license", ""))
                target = getattr(index, catalog)
                if asset.id in target:
                    raise ConfigurationError(f"duplicate {catalog} id {asset.id!r}")
                target[asset.id] = asset
        return index

    @classmethod
    def from_file(cls, path: str | Path, check_paths: bool = False) -> "AssetIndex":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read asset index {path}: {exc}") from exc
        index = cls.from_json_dict(data)
        if check_paths:
            missing = [a.path for cat in (index.meshes, index.hdris, index.materials)
                       for a in cat.values() if not Path(a.path).exists()]
            if missing:
                raise ConfigurationError(f"asset paths do not exist: {missing[:5]}")
        return index

    def require_catalogs(self):
        for name in ("meshes", "hdris", "materials"):
            if not getattr(self, name):
                raise ConfigurationError(f"asset index has an empty {name} catalog")


@dataclass
class Transform:
    position: list[float]
    rotation_euler: list[float]
    scale: float


@dataclass
class MaterialAssignment:
    """Either a reference into the material catalog or an inline uniform
    (textureless) material with one random value per property."""

    kind: str  # "asset" | "uniform"
    asset_id: str | None = None
    albedo: list[float] | None = None
    properties: dict[str, float] | None = None


@dataclass
class ObjectSpec:
    mesh: str
    transform: Transform
    uv_map: str  # "native" uses the mesh UVs, "box" projects
    region_materials: dict[int, MaterialAssignment]


@dataclass
class DistractorSpec:
    mesh: str
    transform: Transform
    material: MaterialAssignment


@dataclass
class GroundSpec:
    mesh: str
    size: float
    material: MaterialAssignment


@dataclass
class HdriSpec:
    id: str
    rotation: float


@dataclass
class LightSpec:
    type: str
    position: list[float]
    power: float


@dataclass
class CameraSpec:
    position: list[float]
    look_at: list[float]
    focal_length_mm: float


@dataclass
class RenderSpec:
    resolution: list[int]
    samples: int


@dataclass
class MapRef:
    """Reference to a persisted SoftRegionMap directory."""

    id: str
    num_regions: int


@dataclass
class Scene3DDescriptor:
    schema_version: int
    seed: int
    region_map: MapRef
    objects: list[ObjectSpec]
    distractors: list[DistractorSpec]
    ground: GroundSpec | None
    hdri: HdriSpec
    lights: list[LightSpec]
    camera: CameraSpec
    render: RenderSpec


def build_scene_descriptor(
    assets: AssetIndex,
    region_map: SoftRegionMap,
    materials: list[str],
    seed: int,
    map_id: str = "map",
    config: Scene3DConfig | None = None,
) -> Scene3DDescriptor:
    """Assemble a randomized scene around one region map.

    materials must provide one catalog id per map region (each may be replaced
    by an inline uniform material with the configured probability).
    """
    cfg = config or Scene3DConfig()
    assets.require_catalogs()
    k = region_map.num_regions
    if len(materials) != k:
        raise ParameterError(f"map has {k} regions but {len(materials)} materials were given")
    unknown = [m for m in materials if m not in assets.materials]
    if unknown:
        raise ParameterError(f"materials not in catalog: {unknown}")

    rng = rng_for(seed)
    mesh_ids = sorted(assets.meshes)
    hdri_ids = sorted(assets.hdris)

    def draw_transform(spread: float, scale_range=(0.6, 1.6)) -> Transform:
        pos = rng.uniform(-spread, spread, size=3)
        pos[2] = abs(pos[2]) * 0.5  # keep objects near or above the ground plane
        rot = rng.uniform(0.0, 2.0 * np.pi, size=3)
        return Transform(position=[round(float(v), 6) for v in pos],
                         rotation_euler=[round(float(v), 6) for v in rot],
                         scale=round(float(rng.uniform(*scale_range)), 6))

    def draw_assignment(catalog_id: str) -> MaterialAssignment:
        if rng.uniform() < cfg.p_textureless:
            return _uniform_material(rng)
        return MaterialAssignment(kind="asset", asset_id=catalog_id)

    n_primary = int(rng.integers(cfg.primary_objects[0], cfg.primary_objects[1] + 1))
    objects = []
    for _ in range(n_primary):
        mesh = mesh_ids[rng.integers(0, len(mesh_ids))]
        table = {region: draw_assignment(materials[region]) for region in range(k)}
        uv = "native" if rng.uniform() < 0.5 else "box"
        objects.append(ObjectSpec(mesh=mesh, transform=draw_transform(1.0),
                                  uv_map=uv, region_materials=table))

    n_distract = int(rng.integers(cfg.distractor_objects[0], cfg.distractor_objects[1] + 1))
    distractors = [
        DistractorSpec(mesh=mesh_ids[rng.integers(0, len(mesh_ids))],
                       transform=draw_transform(2.5),
                       material=_uniform_material(rng))
        for _ in range(n_distract)
    ]

    ground = None
    if rng.uniform() < cfg.p_ground:
        ground = GroundSpec(mesh=mesh_ids[rng.integers(0, len(mesh_ids))],
                            size=round(float(rng.uniform(6.0, 14.0)), 6),
                            material=_uniform_material(rng))

    hdri = HdriSpec(id=hdri_ids[rng.integers(0, len(hdri_ids))],
                    rotation=round(float(rng.uniform(0.0, 2.0 * np.pi)), 6))

    lights: list[LightSpec] = []
    if rng.uniform() < cfg.p_lights:
        n_lights = int(rng.integers(cfg.lights_range[0], cfg.lights_range[1] + 1))
        for _ in range(n_lights):
            pos = rng.uniform(-3.0, 3.0, size=3)
            pos[2] = rng.uniform(2.0, 5.0)
            lights.append(LightSpec(type="point",
                                    position=[round(float(v), 6) for v in pos],
                                    power=round(float(rng.uniform(*cfg.light_power_range)), 6)))

    center, radius = _bounding_volume_of(objects)
    cam_radius = float(rng.uniform(*cfg.camera_radius_range)) * max(radius, 1.0)
    theta = float(rng.uniform(0.0, 2.0 * np.pi))
    phi = float(rng.uniform(np.pi / 6.0, np.pi / 2.2))  # stay above the horizon
    cam_pos = center + cam_radius * np.array([
        np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi),
    ])
    jitter = rng.uniform(-cfg.look_jitter, cfg.look_jitter, size=3) * max(radius, 1.0)
    jitter_norm = float(np.linalg.norm(jitter))
    if jitter_norm > 0.9 * radius:  # look-at must stay inside the object bound
        jitter *= (0.9 * radius) / jitter_norm
    look_at = center + jitter
    camera = CameraSpec(position=[round(float(v), 6) for v in cam_pos],
                        look_at=[round(float(v), 6) for v in look_at],
                        focal_length_mm=round(float(rng.uniform(*cfg.focal_length_range)), 6))

    return Scene3DDescriptor(
        schema_version=SCHEMA_VERSION,
        seed=seed,
        region_map=MapRef(id=map_id, num_regions=k),
        objects=objects,
        distractors=distractors,
        ground=ground,
        hdri=hdri,
        lights=lights,
        camera=camera,
        render=RenderSpec(resolution=list(cfg.resolution), samples=cfg.samples),
    )


def _uniform_material(rng: np.random.Generator) -> MaterialAssignment:
    return MaterialAssignment(
        kind="uniform",
        albedo=[round(float(v), 6) for v in rng.uniform(0.0, 1.0, size=3)],
        properties={name: round(float(rng.uniform()), 6) for name in UNIFORM_PROPS},
    )


def _bounding_volume_of(objects: list[ObjectSpec]) -> tuple[np.ndarray, float]:
    """Center and radius of a sphere around the primary objects' transforms."""
    positions = np.array([o.transform.position for o in objects], dtype=np.float64)
    center = positions.mean(axis=0)
    radius = float(max(np.linalg.norm(positions - center, axis=1).max(initial=0.0), 0.0))
    radius += max(o.transform.scale for o in objects)
    return center, radius


# --- serialization ---------------------------------------------------------

def descriptor_to_dict(desc: Scene3DDescriptor) -> dict:
    def assignment(a: MaterialAssignment) -> dict:
        if a.kind == "asset":
            return {"kind": "asset", "asset_id": a.asset_id}
        return {"kind": "uniform", "albedo": a.albedo, "properties": a.properties}

    return {
        "schema_version": desc.schema_version,
        "seed": desc.seed,
        "region_map": {"id": desc.region_map.id, "num_regions": desc.region_map.num_regions},
        "objects": [
            {
                "mesh": o.mesh,
                "transform": _transform_dict(o.transform),
                "uv_map": o.uv_map,
                "region_materials": {str(r): assignment(a) for r, a in sorted(o.region_materials.items())},
            }
            for o in desc.objects
        ],
        "distractors": [
            {"mesh": d.mesh, "transform": _transform_dict(d.transform), "material": assignment(d.material)}
            for d in desc.distractors
        ],
        "ground": None if desc.ground is None else {
            "mesh": desc.ground.mesh, "size": desc.ground.size,
            "material": assignment(desc.ground.material),
        },
        "hdri": {"id": desc.hdri.id, "rotation": desc.hdri.rotation},
        "lights": [
            {"type": li.type, "position": li.position, "power": li.power} for li in desc.lights
        ],
        "camera": {
            "position": desc.camera.position,
            "look_at": desc.camera.look_at,
            "focal_length_mm": desc.camera.focal_length_mm,
        },
        "render": {"resolution": desc.render.resolution, "samples": desc.render.samples},
    }


def _transform_dict(t: Transform) -> dict:
    return {"position": t.position, "rotation_euler": t.rotation_euler, "scale": t.scale}


def descriptor_from_dict(data: dict) -> Scene3DDescriptor:
    def assignment(d: dict) -> MaterialAssignment:
        if d["kind"] == "asset":
            return MaterialAssignment(kind="asset", asset_id=d["asset_id"])
        return MaterialAssignment(kind="uniform", albedo=d["albedo"], properties=d["properties"])

    def transform(d: dict) -> Transform:
        return Transform(position=d["position"], rotation_euler=d["rotation_euler"], scale=d["scale"])

    return Scene3DDescriptor(
        schema_version=data["schema_version"],
        seed=data["seed"],
        region_map=MapRef(id=data["region_map"]["id"], num_regions=data["region_map"]["num_regions"]),
        objects=[
            ObjectSpec(
                mesh=o["mesh"],
                transform=transform(o["transform"]),
                uv_map=o["uv_map"],
                region_materials={int(r): assignment(a) for r, a in o["region_materials"].items()},
            )
            for o in data["objects"]
        ],
        distractors=[
            DistractorSpec(mesh=d["mesh"], transform=transform(d["transform"]),
                           material=assignment(d["material"]))
            for d in data["distractors"]
        ],
        ground=None if data["ground"] is None else GroundSpec(
            mesh=data["ground"]["mesh"], size=data["ground"]["size"],
            material=assignment(data["ground"]["material"]),
        ),
        hdri=HdriSpec(id=data["hdri"]["id"], rotation=data["hdri"]["rotation"]),
        lights=[LightSpec(type=li["type"], position=li["position"], power=li["power"])
                for li in data["lights"]],
        camera=CameraSpec(
            position=data["camera"]["position"],
            look_at=data["camera"]["look_at"],
            focal_length_mm=data["camera"]["focal_length_mm"],
        ),
        render=RenderSpec(resolution=data["render"]["resolution"], samples=data["render"]["samples"]),
    )


def serialize_descriptor(desc: Scene3DDescriptor) -> str:
    return json.dumps(descriptor_to_dict(desc), indent=2, sort_keys=True) + "\n"


def parse_descriptor(text: str) -> Scene3DDescriptor:
    return descriptor_from_dict(json.loads(text))


def save_descriptor(desc: Scene3DDescriptor, path: str | Path) -> None:
    from matscene.imgio import atomic_write_bytes

    atomic_write_bytes(path, serialize_descriptor(desc).encode("utf-8"))


def load_descriptor(path: str | Path) -> Scene3DDescriptor:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_descriptor(fh.read())


# --- validation ------------------------------------------------------------

@dataclass
class RuleResult:
    rule: str
    detail: str


@dataclass
class ValidationReport:
    failures: list[RuleResult] = field(default_factory=list)
    checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checked": self.checked,
            "failures": [{"rule": f.rule, "detail": f.detail} for f in self.failures],
        }


def validate_descriptor(desc: Scene3DDescriptor, assets: AssetIndex) -> ValidationReport:
    """Machine-readable invariant check; failures are reported, never raised."""
    report = ValidationReport()

    def check(rule: str, ok: bool, detail: str):
        report.checked += 1
        if not ok:
            report.failures.append(RuleResult(rule=rule, detail=detail))

    check("schema_version", desc.schema_version == SCHEMA_VERSION,
          f"unsupported schema version {desc.schema_version}")

    k = desc.region_map.num_regions
    for o in desc.objects:
        check("mesh_resolves", o.mesh in assets.meshes, f"unresolved asset {o.mesh!r}")
        for region, assign in o.region_materials.items():
            check("region_known", 0 <= region < k, f"unknown region {region} (map has {k})")
            _check_assignment(check, assign, assets)
    for d in desc.distractors:
        check("mesh_resolves", d.mesh in assets.meshes, f"unresolved asset {d.mesh!r}")
        _check_assignment(check, d.material, assets)
    if desc.ground is not None:
        check("mesh_resolves", desc.ground.mesh in assets.meshes,
              f"unresolved asset {desc.ground.mesh!r}")
        _check_assignment(check, desc.ground.material, assets)
    check("hdri_resolves", desc.hdri.id in assets.hdris, f"unresolved asset {desc.hdri.id!r}")

    check("has_objects", len(desc.objects) >= 1, "descriptor has no primary objects")
    if desc.objects:
        center, radius = _bounding_volume_of(desc.objects)
        dist = float(np.linalg.norm(np.asarray(desc.camera.look_at) - center))
        check("camera_targets_scene", dist <= radius + 1e-5,
              f"look_at {dist:.3f} from center exceeds bound radius {radius:.3f}")
    for li in desc.lights:
        check("light_power", li.power > 0, f"non-positive light power {li.power}")
    check("render_resolution", all(v > 0 for v in desc.render.resolution),
          f"bad resolution {desc.render.resolution}")
    check("render_samples", desc.render.samples > 0, f"bad sample count {desc.render.samples}")
    check("camera_focal", desc.camera.focal_length_mm > 0,
          f"bad focal length {desc.camera.focal_length_mm}")
    return report


def _check_assignment(check, assign: MaterialAssignment, assets: AssetIndex):
    if assign.kind == "asset":
        check("material_resolves", assign.asset_id in assets.materials,
              f"unresolved asset {assign.asset_id!r}")
    elif assign.kind == "uniform":
        values = list(assign.albedo or []) + list((assign.properties or {}).values())
        check("uniform_range", all(0.0 <= v <= 1.0 for v in values),
              f"uniform material value outside [0,1]: {values}")
    else:
        check("material_kind", False, f"unknown material kind {assign.kind!r}")
