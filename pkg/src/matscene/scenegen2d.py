"""Annotated 2D scene composition.

A soft region map assigns one texture per region; the composed image is the
weight-blended mix of the tiled textures over a background image, optionally
darkened by a shadow map. The map's weights are emitted unchanged as soft
ground truth, so annotations never see the shadow.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from matscene import imgio
from matscene.config import RegionMapConfig, Scene2DConfig
from matscene.errors import ConfigurationError, ParameterError
from matscene.imagemaps import SoftRegionMap, sample_region_map
from matscene.seeding import derive_seed, rng_for, spawn_seeds
from matscene.texextract import TextureTile


@dataclass
class ShadowSpec:
    """Multiplicative darkening by strength * map value."""

    shadow_map: np.ndarray  # (H, W) in [0, 1]
    strength: float

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ParameterError(f"shadow strength must be in [0,1], got {self.strength}")


@dataclass
class RenderedSample2D:
    """Composed image plus its soft per-material ground truth."""

    rgb: np.ndarray                 # (H, W, 3) in [0, 1]
    gt_weights: np.ndarray          # (K, H, W)
    background_weight: np.ndarray   # (H, W)
    material_ids: list[str] = field(default_factory=list)
    seed: int | None = None


def _mirror_indices(n_out: int, n_src: int) -> np.ndarray:
    idx = np.arange(n_out) % (2 * n_src)
    return np.where(idx < n_src, idx, 2 * n_src - 1 - idx)


def tile_texture(tile: TextureTile | np.ndarray, height: int, width: int) -> np.ndarray:
    """Cover (height, width) with the texture using mirrored repeats.

    A tile at least as large as the target is plainly cropped.
    """
    pixels = tile.pixels if isinstance(tile, TextureTile) else np.asarray(tile, dtype=np.float64)
    if pixels.size == 0:
        raise ParameterError("cannot tile an empty texture")
    h, w = pixels.shape[:2]
    if h >= height and w >= width:
        return pixels[:height, :width].copy()
    return pixels[np.ix_(_mirror_indices(height, h), _mirror_indices(width, w))]


def compose_scene_2d(
    region_map: SoftRegionMap,
    tiles: list[TextureTile | np.ndarray],
    background: np.ndarray,
    shadow: ShadowSpec | None = None,
    seed: int | None = None,
    material_ids: list[str] | None = None,
    linear_blend: bool = True,
) -> RenderedSample2D:
    """Blend one texture per region by the map weights over the background.

    rgb(x) = sum_k w_k(x) * tex_k(x) + w_bg(x) * background(x), optionally
    followed by rgb *= (1 - strength * shadow_map). With linear_blend the mix
    happens in linear RGB (sRGB decoded, re-encoded afterwards). Ground-truth
    weights are the map's weights, unaffected by the shadow.
    """
    k = region_map.num_regions
    if len(tiles) != k:
        raise ParameterError(f"map has {k} regions but {len(tiles)} tiles were given")
    h, w = region_map.background_weight.shape

    bg = imgio.to_unit_float(background) if background.ndim == 3 else np.asarray(background, dtype=np.float64)
    if bg.shape[:2] != (h, w):
        bg = imgio.resize_bilinear(bg, h, w)

    planes = [tile_texture(t, h, w) for t in tiles]
    if linear_blend:
        planes = [imgio.srgb_to_linear(p) for p in planes]
        bg = imgio.srgb_to_linear(bg)

    acc = bg * region_map.background_weight[..., None]
    for kk in range(k):
        acc += planes[kk] * region_map.region_weights[kk][..., None]

    if shadow is not None:
        smap = shadow.shadow_map
        if smap.shape != (h, w):
            smap = imgio.resize_bilinear(smap, h, w)
        acc *= (1.0 - shadow.strength * smap)[..., None]

    rgb = imgio.linear_to_srgb(acc) if linear_blend else acc
    rgb = np.clip(rgb, 0.0, 1.0)

    return RenderedSample2D(
        rgb=rgb,
        gt_weights=region_map.region_weights.copy(),
        background_weight=region_map.background_weight.copy(),
        material_ids=list(material_ids) if material_ids else [f"mat{idx}" for idx in range(k)],
        seed=seed,
    )


def save_sample(sample: RenderedSample2D, out_dir: str | Path) -> None:
    """samples/NNNNNN layout: rgb.png, one 16-bit gt plane per material, meta.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    imgio.save_png8(out_dir / "rgb.png", sample.rgb)
    for k in range(sample.gt_weights.shape[0]):
        imgio.save_png16_gray(out_dir / f"gt_mat{k}.png", sample.gt_weights[k])
    imgio.save_png16_gray(out_dir / "gt_bg.png", sample.background_weight)
    imgio.atomic_write_json(out_dir / "meta.json", {
        "material_ids": sample.material_ids,
        "num_materials": sample.gt_weights.shape[0],
        "seed": sample.seed,
    })


def load_sample(sample_dir: str | Path) -> RenderedSample2D:
    sample_dir = Path(sample_dir)
    meta = imgio.read_json(sample_dir / "meta.json")
    rgb = imgio.to_unit_float(imgio.load_rgb(sample_dir / "rgb.png"))
    weights = np.stack([
        imgio.load_png16_gray(sample_dir / f"gt_mat{k}.png")
        for k in range(meta["num_materials"])
    ])
    bg = imgio.load_png16_gray(sample_dir / "gt_bg.png")
    return RenderedSample2D(rgb=rgb, gt_weights=weights, background_weight=bg,
                            material_ids=meta["material_ids"], seed=meta["seed"])


def material_palette(n: int) -> np.ndarray:
    """n visually distinct colors (golden-angle hue walk), background excluded."""
    hues = (np.arange(n) * 0.61803398875) % 1.0
    colors = np.empty((n, 3))
    for i, hue in enumerate(hues):
        colors[i] = _hsv_to_rgb(hue, 0.85, 0.95)
    return colors


def _hsv_to_rgb(h: float, s: float, v: float) -> np.ndarray:
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return np.array(rgb)


def annotation_preview(gt_weights: np.ndarray) -> np.ndarray:
    """Color-coded annotation image: one color per material, mixtures blend,
    background stays black."""
    k = gt_weights.shape[0]
    palette = material_palette(k)
    out = np.zeros(gt_weights.shape[1:] + (3,), dtype=np.float64)
    for kk in range(k):
        out += gt_weights[kk][..., None] * palette[kk]
    return np.clip(out, 0.0, 1.0)


@dataclass
class Batch2DPools:
    """Source pools for batch generation; entries are float RGB arrays in [0,1]
    paired with stable string ids."""

    map_sources: list[tuple[str, np.ndarray]]
    tiles: list[tuple[str, np.ndarray]]
    backgrounds: list[tuple[str, np.ndarray]]

    def validate(self):
        for name in ("map_sources", "tiles", "backgrounds"):
            if not getattr(self, name):
                raise ConfigurationError(f"empty pool: {name}")


def generate_batch_2d(
    pools: Batch2DPools,
    count: int,
    seed: int,
    out_dir: str | Path,
    scene_config: Scene2DConfig | None = None,
    map_config: RegionMapConfig | None = None,
    config_hash: str = "",
) -> dict:
    """Generate `count` annotated samples under out_dir; returns the manifest dict.

    Every sample is deterministic in (seed, index): pool draws, the region map
    and the shadow all derive from a per-sample seed.
    """
    pools.validate()
    scfg = scene_config or Scene2DConfig()
    mcfg = map_config or RegionMapConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.monotonic()

    items = []
    for index in range(count):
        sample_seed = derive_seed(seed, f"sample/{index:06d}")
        sample, ids = _generate_one(pools, sample_seed, scfg, mcfg)
        save_sample(sample, out_dir / "samples" / f"{index:06d}")
        gt_total = sample.gt_weights.sum(axis=0) + sample.background_weight
        items.append({
            "index": index,
            "status": "ok",
            "materials": ids,
            # in-memory invariant, recorded before 16-bit quantization
            "gt_sum_err": float(round(np.abs(gt_total - 1.0).max(), 12)),
        })

    manifest = {
        "kind": "dataset2d",
        "seed": seed,
        "count": count,
        "config_hash": config_hash,
        "items": items,
        "timing": {"wall_time_s": round(time.monotonic() - t0, 3)},
    }
    imgio.atomic_write_json(out_dir / "manifest.json", manifest)
    return manifest


def _generate_one(
    pools: Batch2DPools, sample_seed: int, scfg: Scene2DConfig, mcfg: RegionMapConfig
) -> tuple[RenderedSample2D, list[str]]:
    rng = rng_for(sample_seed)
    map_seed, shadow_seed = spawn_seeds(sample_seed, 2)

    src_id, src = pools.map_sources[rng.integers(0, len(pools.map_sources))]
    if scfg.target_size is not None:
        src = imgio.resize_bilinear(src, *scfg.target_size)
    k = int(rng.integers(mcfg.k_min, mcfg.k_max + 1))
    region_map = sample_region_map(src, map_seed, k, mcfg)

    picks = [pools.tiles[rng.integers(0, len(pools.tiles))] for _ in range(k)]
    tile_ids = [p[0] for p in picks]
    tile_arrays = [p[1] for p in picks]
    bg_id, bg = pools.backgrounds[rng.integers(0, len(pools.backgrounds))]

    shadow = None
    if rng.uniform() < scfg.shadow_prob:
        shadow_src_id, shadow_src = pools.map_sources[rng.integers(0, len(pools.map_sources))]
        if scfg.target_size is not None:
            shadow_src = imgio.resize_bilinear(shadow_src, *scfg.target_size)
        shadow_map = sample_region_map(shadow_src, shadow_seed, 1, mcfg).region_weights[0]
        strength = float(rng.uniform(*scfg.shadow_strength_range))
        if shadow_map.shape != region_map.background_weight.shape:
            shadow_map = imgio.resize_bilinear(shadow_map, *region_map.background_weight.shape)
        shadow = ShadowSpec(shadow_map=shadow_map, strength=strength)

    sample = compose_scene_2d(
        region_map,
        tile_arrays,
        bg,
        shadow=shadow,
        seed=sample_seed,
        material_ids=tile_ids,
        linear_blend=scfg.linear_blend,
    )
    return sample, tile_ids
