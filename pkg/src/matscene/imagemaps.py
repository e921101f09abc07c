"""Soft multi-region map generation.

An image is split into six scalar planes (R, G, B, H, S, V). One random plane
pushed through a random two-threshold ramp yields a soft binary map; stacking
several such maps by residual carving yields a multi-region map whose weights
sum to one with a background residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from matscene import imgio
from matscene.config import RegionMapConfig
from matscene.errors import DecodeError, ParameterError
from matscene.seeding import rng_for

CHANNELS = ("R", "G", "B", "H", "S", "V")


@dataclass
class ImageChannelStack:
    """Six aligned scalar planes of one image, all in [0, 1]."""

    width: int
    height: int
    planes: dict[str, np.ndarray]

    def plane(self, name: str) -> np.ndarray:
        return self.planes[name]


@dataclass
class RampParams:
    """Two-threshold soft ramp: 0 below t_low, 1 above t_high, linear between."""

    t_low: float
    t_high: float

    def __post_init__(self):
        if not (0.0 <= self.t_low <= 1.0 and 0.0 <= self.t_high <= 1.0):
            raise ParameterError(f"ramp thresholds must lie in [0,1]: ({self.t_low}, {self.t_high})")
        if self.t_low > self.t_high:
            raise ParameterError(f"t_low {self.t_low} exceeds t_high {self.t_high}")


@dataclass
class RegionRecipe:
    """Provenance of one region map: the channel and ramp that produced it."""

    channel: str
    t_low: float
    t_high: float


@dataclass
class SoftRegionMap:
    """Per-pixel soft weights over K regions plus a background residual.

    region_weights has shape (K, H, W); weights and background sum to 1 at
    every pixel.
    """

    width: int
    height: int
    region_weights: np.ndarray
    background_weight: np.ndarray
    recipes: list[RegionRecipe] = field(default_factory=list)
    seed: int | None = None

    @property
    def num_regions(self) -> int:
        return self.region_weights.shape[0]


def hsv_planes(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone RGB->HSV on float planes in [0,1]; H scaled to [0,1), H=0 when S=0."""
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    v = maxc
    delta = maxc - minc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        maxc == r,
        (g - b) / safe,
        np.where(maxc == g, 2.0 + (b - r) / safe, 4.0 + (r - g) / safe),
    )
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return h, s, v


def decompose_channels(image: np.ndarray) -> ImageChannelStack:
    """Split an 8/16-bit RGB raster into six normalized planes."""
    if image is None or not isinstance(image, np.ndarray):
        raise DecodeError("decompose_channels expects an ndarray image")
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise DecodeError(f"expected non-empty (H, W, 3) RGB array, got shape {getattr(image, 'shape', None)}")
    if image.dtype == np.uint8:
        rgb = image.astype(np.float64) / 255.0
    elif image.dtype == np.uint16:
        rgb = image.astype(np.float64) / 65535.0
    else:
        raise DecodeError(f"expected uint8 or uint16 RGB image, got dtype {image.dtype}")
    return stack_from_float_rgb(rgb)


def stack_from_float_rgb(rgb: np.ndarray) -> ImageChannelStack:
    """Build a channel stack from a float (H, W, 3) array already in [0,1]."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    h, s, v = hsv_planes(r, g, b)
    height, width = rgb.shape[:2]
    planes = {"R": r.copy(), "G": g.copy(), "B": b.copy(), "H": h, "S": s, "V": v}
    return ImageChannelStack(width=width, height=height, planes=planes)


def ramp_threshold(plane: np.ndarray, params: RampParams) -> np.ndarray:
    """Soft threshold: 0 at/below t_low, 1 at/above t_high, linear between.

    Equal thresholds degenerate to a hard step (x <= t maps to 0).
    """
    plane = np.asarray(plane, dtype=np.float64)
    if params.t_low == params.t_high:
        return (plane > params.t_high).astype(np.float64)
    with np.errstate(over="ignore"):  # subnormal gaps overflow; clip resolves them
        return np.clip((plane - params.t_low) / (params.t_high - params.t_low), 0.0, 1.0)


def sample_region_map(
    image: np.ndarray,
    seed: int,
    num_regions: int,
    config: RegionMapConfig | None = None,
) -> SoftRegionMap:
    """Draw a K-region soft map from random channels and random ramps.

    Regions are stacked by residual carving: w_1 = m_1 and
    w_k = m_k * (1 - sum of earlier weights), so weights plus the background
    residual always sum to one. Maps with near-empty or near-full coverage are
    redrawn a bounded number of times, then accepted as-is.
    """
    if num_regions < 1:
        raise ParameterError(f"num_regions must be >= 1, got {num_regions}")
    cfg = config or RegionMapConfig(k_min=1, k_max=max(1, num_regions))
    stack = decompose_channels(image) if image.dtype in (np.uint8, np.uint16) else stack_from_float_rgb(imgio.to_unit_float(image))
    rng = rng_for(seed)

    remaining = np.ones((stack.height, stack.width), dtype=np.float64)
    weights = []
    recipes = []
    for _ in range(num_regions):
        mask, recipe = _draw_region_mask(stack, rng, cfg)
        w = mask * remaining
        remaining = remaining - w
        weights.append(w)
        recipes.append(recipe)

    return SoftRegionMap(
        width=stack.width,
        height=stack.height,
        region_weights=np.stack(weights, axis=0),
        background_weight=remaining,
        recipes=recipes,
        seed=seed,
    )


def _draw_region_mask(
    stack: ImageChannelStack, rng: np.random.Generator, cfg: RegionMapConfig
) -> tuple[np.ndarray, RegionRecipe]:
    mask = None
    recipe = None
    for _ in range(cfg.max_resamples + 1):
        channel = CHANNELS[rng.integers(0, len(CHANNELS))]
        t_low, t_high = _draw_ramp(rng, cfg.min_ramp_gap)
        mask = ramp_threshold(stack.planes[channel], RampParams(t_low, t_high))
        recipe = RegionRecipe(channel=channel, t_low=t_low, t_high=t_high)
        area = float(mask.mean())
        if cfg.area_min <= area <= cfg.area_max:
            break
    return mask, recipe


def _draw_ramp(rng: np.random.Generator, min_gap: float) -> tuple[float, float]:
    while True:
        a, b = np.sort(rng.uniform(0.0, 1.0, size=2))
        if b - a >= min_gap:
            return float(a), float(b)


def save_region_map(region_map: SoftRegionMap, out_dir: str | Path) -> None:
    """Persist as one 16-bit grayscale PNG per region plus a JSON sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k in range(region_map.num_regions):
        imgio.save_png16_gray(out_dir / f"region_{k:02d}.png", region_map.region_weights[k])
    sidecar = {
        "seed": region_map.seed,
        "num_regions": region_map.num_regions,
        "width": region_map.width,
        "height": region_map.height,
        "regions": [
            {"channel": r.channel, "t_low": r.t_low, "t_high": r.t_high}
            for r in region_map.recipes
        ],
    }
    imgio.atomic_write_json(out_dir / "map.json", sidecar)


def load_region_map(map_dir: str | Path) -> SoftRegionMap:
    """Reload a persisted map; background is reconstructed as the residual."""
    map_dir = Path(map_dir)
    meta = imgio.read_json(map_dir / "map.json")
    planes = [
        imgio.load_png16_gray(map_dir / f"region_{k:02d}.png")
        for k in range(meta["num_regions"])
    ]
    weights = np.stack(planes, axis=0)
    background = np.clip(1.0 - weights.sum(axis=0), 0.0, 1.0)
    recipes = [RegionRecipe(r["channel"], r["t_low"], r["t_high"]) for r in meta["regions"]]
    return SoftRegionMap(
        width=meta["width"],
        height=meta["height"],
        region_weights=weights,
        background_weight=background,
        recipes=recipes,
        seed=meta["seed"],
    )
