"""PBR material synthesis from texture tiles.

Each property map is one random channel of the tile pushed through random
augmentation (invert, scale/shift, optional ramp, optional blur), or collapses
to a single uniform scalar. Normals come from the gradient of the height map.
New materials can be made by weighted-averaging two existing ones, with the
weight drawn once per material or independently per map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from matscene import imgio
from matscene.config import AugmentConfig
from matscene.errors import ParameterError
from matscene.imagemaps import CHANNELS, RampParams, ramp_threshold, stack_from_float_rgb
from matscene.seeding import rng_for, spawn_seeds
from matscene.texextract import TextureTile

SCALAR_PROPS = ("roughness", "metallic", "height", "transmission", "specular")
ALL_PROPS = ("albedo",) + SCALAR_PROPS + ("normal",)


@dataclass
class AugmentSpec:
    """One drawn augmentation: which channel and how it is reshaped."""

    channel: str
    scale: float = 1.0
    shift: float = 0.0
    ramp: RampParams | None = None
    blur_sigma: float = 0.0
    invert: bool = False


@dataclass
class PbrMaterial:
    """Property maps of one material.

    albedo and normal are (H, W, 3); the scalar properties are each either a
    (H, W) map or one uniform float, all in [0, 1]. Normals are unit vectors
    encoded as (n + 1) / 2.
    """

    albedo: np.ndarray
    normal: np.ndarray
    roughness: float | np.ndarray
    metallic: float | np.ndarray
    height: float | np.ndarray
    transmission: float | np.ndarray
    specular: float | np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def resolution(self) -> tuple[int, int]:
        """(height, width) shared by all non-uniform maps."""
        return self.albedo.shape[0], self.albedo.shape[1]

    def prop(self, name: str):
        return getattr(self, name)


def apply_augment(plane: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Apply invert, affine scale/shift, optional ramp and blur; clamp to [0,1]."""
    out = np.asarray(plane, dtype=np.float64)
    if spec.invert:
        out = 1.0 - out
    out = np.clip(out * spec.scale + spec.shift, 0.0, 1.0)
    if spec.ramp is not None:
        out = ramp_threshold(out, spec.ramp)
    if spec.blur_sigma > 0:
        out = np.clip(gaussian_filter(out, sigma=spec.blur_sigma, mode="nearest"), 0.0, 1.0)
    return out


def _draw_augment(rng: np.random.Generator, cfg: AugmentConfig) -> AugmentSpec:
    channel = CHANNELS[rng.integers(0, len(CHANNELS))]
    invert = bool(rng.uniform() < cfg.invert_prob)
    scale = float(rng.uniform(*cfg.scale_range))
    shift = float(rng.uniform(*cfg.shift_range))
    ramp = None
    if rng.uniform() < cfg.ramp_prob:
        a, b = np.sort(rng.uniform(0.0, 1.0, size=2))
        ramp = RampParams(float(a), float(b))
    blur_sigma = float(rng.uniform(0.0, cfg.blur_sigma_max))
    return AugmentSpec(channel=channel, scale=scale, shift=shift, ramp=ramp,
                       blur_sigma=blur_sigma, invert=invert)


def synth_property_map(
    tile: TextureTile, seed: int, config: AugmentConfig | None = None
) -> float | np.ndarray:
    """One property map from a tile: either a uniform scalar or an augmented channel."""
    cfg = config or AugmentConfig()
    if tile.pixels.size == 0:
        raise ParameterError("tile is empty")
    rng = rng_for(seed)
    if rng.uniform() < cfg.uniform_prob:
        return float(rng.uniform())
    spec = _draw_augment(rng, cfg)
    stack = stack_from_float_rgb(tile.pixels)
    return apply_augment(stack.planes[spec.channel], spec)


def height_to_normal(height: np.ndarray, strength: float) -> np.ndarray:
    """Normals from the height gradient, encoded to [0,1]^3.

    n = normalize(-s * dh/dx, -s * dh/dy, 1) with central differences and
    edge-replicated borders.
    """
    if strength <= 0:
        raise ParameterError(f"strength must be > 0, got {strength}")
    h = np.asarray(height, dtype=np.float64)
    padded = np.pad(h, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    n = np.stack([-strength * gx, -strength * gy, np.ones_like(h)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return (n + 1.0) / 2.0


def decode_normal(encoded: np.ndarray) -> np.ndarray:
    return encoded * 2.0 - 1.0


def make_pbr(tile: TextureTile, seed: int, config: AugmentConfig | None = None) -> PbrMaterial:
    """Build a full material from one tile: albedo is the raw tile, the scalar
    properties are independently synthesized, the normal follows the height map."""
    cfg = config or AugmentConfig()
    rng = rng_for(seed)
    strength = float(rng.uniform(*cfg.normal_strength_range))
    sub_seeds = spawn_seeds(seed, len(SCALAR_PROPS))
    props: dict[str, float | np.ndarray] = {}
    for name, sub in zip(SCALAR_PROPS, sub_seeds):
        props[name] = synth_property_map(tile, sub, cfg)

    hmap = props["height"]
    if isinstance(hmap, float):
        hmap = np.full(tile.pixels.shape[:2], hmap, dtype=np.float64)
    normal = height_to_normal(hmap, strength)

    return PbrMaterial(
        albedo=tile.pixels.copy(),
        normal=normal,
        provenance={
            "image_id": tile.image_id,
            "origin_cells": list(tile.origin_cells),
            "side_cells": tile.side_cells,
            "seed": seed,
            "normal_strength": strength,
        },
        **props,
    )


def _mix_map(a, b, w: float, shape: tuple[int, int]):
    """Affine mix of two property values; scalars stay scalar."""
    if w == 1.0:
        return a if isinstance(a, float) else a.copy()
    if w == 0.0:
        return b if isinstance(b, float) else b.copy()
    if isinstance(a, float) and isinstance(b, float):
        return w * a + (1.0 - w) * b
    am = np.full(shape, a) if isinstance(a, float) else a
    bm = np.full(shape, b) if isinstance(b, float) else b
    return w * am + (1.0 - w) * bm


def _mix_normal(a: np.ndarray, b: np.ndarray, w: float) -> np.ndarray:
    if w == 1.0:
        return a.copy()
    if w == 0.0:
        return b.copy()
    v = w * decode_normal(a) + (1.0 - w) * decode_normal(b)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    degenerate = norm <= 1e-12  # opposite normals cancel; fall back to +z
    v = np.where(degenerate, np.array([0.0, 0.0, 1.0]), v / np.where(degenerate, 1.0, norm))
    return (v + 1.0) / 2.0


def _resampled_to(mat: PbrMaterial, shape: tuple[int, int]) -> PbrMaterial:
    if mat.resolution == shape:
        return mat
    h, w = shape
    fields = {}
    for name in SCALAR_PROPS:
        v = mat.prop(name)
        fields[name] = v if isinstance(v, float) else imgio.resize_bilinear(v, h, w)
    normal = imgio.resize_bilinear(mat.normal, h, w)
    # renormalize after interpolation so decoded vectors stay unit length
    v = decode_normal(normal)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return PbrMaterial(
        albedo=imgio.resize_bilinear(mat.albedo, h, w),
        normal=(v + 1.0) / 2.0,
        provenance=dict(mat.provenance),
        **fields,
    )


def mix_pbr(
    a: PbrMaterial,
    b: PbrMaterial,
    mode: str = "per_map",
    seed: int = 0,
    weights: float | dict[str, float] | None = None,
) -> PbrMaterial:
    """Weighted average of two materials.

    mode "per_material" draws one weight for every map; "per_map" draws an
    independent weight per property. Explicit weights (one float, or a dict
    keyed by property) override the draw. b is resampled to a's resolution
    when they differ; normals are re-normalized after averaging.
    """
    if mode not in ("per_map", "per_material"):
        raise ParameterError(f"unknown mix mode {mode!r}")
    b = _resampled_to(b, a.resolution)
    rng = rng_for(seed)
    if weights is None:
        if mode == "per_material":
            shared = float(rng.uniform())
            wmap = {name: shared for name in ALL_PROPS}
        else:
            wmap = {name: float(rng.uniform()) for name in ALL_PROPS}
    elif isinstance(weights, dict):
        missing = set(ALL_PROPS) - set(weights)
        if missing:
            raise ParameterError(f"missing mix weights for {sorted(missing)}")
        wmap = {name: float(weights[name]) for name in ALL_PROPS}
    else:
        wmap = {name: float(weights) for name in ALL_PROPS}

    shape = a.resolution
    fields = {name: _mix_map(a.prop(name), b.prop(name), wmap[name], shape) for name in SCALAR_PROPS}
    return PbrMaterial(
        albedo=_mix_map(a.albedo, b.albedo, wmap["albedo"], shape),
        normal=_mix_normal(a.normal, b.normal, wmap["normal"]),
        provenance={
            "mixed_from": [a.provenance.get("seed"), b.provenance.get("seed")],
            "mode": mode,
            "mix_weights": dict(wmap),
            "seed": seed,
        },
        **fields,
    )


def validate_material(mat: PbrMaterial, atol: float = 1e-3) -> None:
    """Raise ParameterError when maps leave [0,1], sizes disagree or normals
    are not unit length after decoding."""
    res = mat.resolution
    def _check_range(name, v):
        arr = np.asarray(v)
        if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
            raise ParameterError(f"{name} leaves [0,1]: [{arr.min()}, {arr.max()}]")
    _check_range("albedo", mat.albedo)
    for name in SCALAR_PROPS:
        v = mat.prop(name)
        _check_range(name, v)
        if not isinstance(v, float) and v.shape != res:
            raise ParameterError(f"{name} shape {v.shape} != albedo {res}")
    if mat.normal.shape[:2] != res:
        raise ParameterError(f"normal shape {mat.normal.shape} != albedo {res}")
    lengths = np.linalg.norm(decode_normal(mat.normal), axis=-1)
    err = np.abs(lengths - 1.0).max()
    if err > atol:
        raise ParameterError(f"decoded normals deviate from unit length by {err}")


def save_material(mat: PbrMaterial, out_dir: str | Path) -> None:
    """Material directory: PNG maps plus material.json for scalars/provenance."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    imgio.save_png8(out_dir / "albedo.png", mat.albedo)
    imgio.save_png8(out_dir / "normal.png", mat.normal)
    uniform: dict[str, float] = {}
    for name in SCALAR_PROPS:
        v = mat.prop(name)
        if isinstance(v, float):
            uniform[name] = v
        else:
            imgio.save_png16_gray(out_dir / f"{name}.png", v)
    imgio.atomic_write_json(out_dir / "material.json", {
        "uniform": uniform,
        "provenance": mat.provenance,
    })


def load_material(mat_dir: str | Path) -> PbrMaterial:
    mat_dir = Path(mat_dir)
    meta = imgio.read_json(mat_dir / "material.json")
    albedo = imgio.to_unit_float(np.asarray(imgio.load_rgb(mat_dir / "albedo.png")))
    normal = imgio.to_unit_float(np.asarray(imgio.load_rgb(mat_dir / "normal.png")))
    fields = {}
    for name in SCALAR_PROPS:
        if name in meta["uniform"]:
            fields[name] = float(meta["uniform"][name])
        else:
            fields[name] = imgio.load_png16_gray(mat_dir / f"{name}.png")
    return PbrMaterial(albedo=albedo, normal=normal, provenance=meta.get("provenance", {}), **fields)
