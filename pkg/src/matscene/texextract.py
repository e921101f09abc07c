"""Uniform-texture mining by grid-cell statistics.

The image is split into square cells; each cell is summarized by normalized
histograms of the RGB values and of their gradient magnitudes. A square block
of cells is a uniform texture when every pair of cells in it agrees on all six
histograms under the Jensen-Shannon distance. Kept blocks are cropped as
texture tiles; flat, too-dark and too-bright blocks are discarded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from matscene import imgio
from matscene.config import ExtractionConfig
from matscene.errors import ParameterError, TooSmallError

HIST_NAMES = ("R", "G", "B", "gradR", "gradG", "gradB")


@dataclass
class CellStats:
    """Histogram summary of one cell (or one whole region).

    hists rows follow HIST_NAMES: value histograms of R, G, B then
    gradient-magnitude histograms of R, G, B. Each row sums to 1.
    """

    hists: np.ndarray  # (6, bins)
    mean: np.ndarray   # (3,) per-channel mean
    std: np.ndarray    # (3,) per-channel standard deviation


@dataclass
class CellGrid:
    """Per-cell statistics for the full image grid."""

    rows: int
    cols: int
    cell_size: int
    bins: int
    hists: np.ndarray  # (rows, cols, 6, bins)
    mean: np.ndarray   # (rows, cols, 3)
    std: np.ndarray    # (rows, cols, 3)

    def cell(self, row: int, col: int) -> CellStats:
        return CellStats(self.hists[row, col], self.mean[row, col], self.std[row, col])


@dataclass
class Region:
    """A square block of cells anchored at (row, col), side cells per edge."""

    row: int
    col: int
    side: int
    cell_size: int

    @property
    def pixel_origin(self) -> tuple[int, int]:
        """(y, x) of the top-left pixel."""
        return self.row * self.cell_size, self.col * self.cell_size

    @property
    def pixel_size(self) -> int:
        return self.side * self.cell_size


@dataclass
class TextureTile:
    """Cropped uniform-texture block with provenance."""

    pixels: np.ndarray  # (S, S, 3) float in [0, 1]
    image_id: str
    origin_cells: tuple[int, int]  # (row, col)
    side_cells: int
    cell_size: int
    stats: CellStats


@dataclass
class RejectedRegion:
    region: Region
    reason: str


def _unit_rgb(image: np.ndarray) -> np.ndarray:
    if np.issubdtype(image.dtype, np.floating):
        if image.ndim != 3 or image.shape[2] != 3:
            raise ParameterError(f"expected (H, W, 3) image, got shape {image.shape}")
        return image.astype(np.float64)
    return imgio.to_unit_float(image)


def _gradient_magnitude(plane: np.ndarray) -> np.ndarray:
    """Central differences with edge-replicated borders; mean of |dx|, |dy|."""
    gx = np.empty_like(plane)
    gx[:, 1:-1] = plane[:, 2:] - plane[:, :-2]
    gx[:, 0] = plane[:, 1] - plane[:, 0]
    gx[:, -1] = plane[:, -1] - plane[:, -2]
    gy = np.empty_like(plane)
    gy[1:-1, :] = plane[2:, :] - plane[:-2, :]
    gy[0, :] = plane[1, :] - plane[0, :]
    gy[-1, :] = plane[-1, :] - plane[-2, :]
    np.abs(gx, out=gx)
    np.abs(gy, out=gy)
    gx += gy
    gx /= 4.0  # (|dx| + |dy|) / 2 with the /2 of each central difference folded in
    return np.clip(gx, 0.0, 1.0, out=gx)


def _bin_indices(plane: np.ndarray, bins: int) -> np.ndarray:
    idx = (plane * bins).astype(np.int64)
    return np.minimum(idx, bins - 1)


def compute_cell_stats(image: np.ndarray, config: ExtractionConfig) -> CellGrid:
    """Summarize every full cell of the grid; partial border cells are dropped."""
    rgb = _unit_rgb(image)
    h, w = rgb.shape[:2]
    cs = config.cell_size
    rows, cols = h // cs, w // cs
    if rows < 1 or cols < 1:
        raise TooSmallError(f"image {w}x{h} is smaller than one {cs}x{cs} cell")
    rgb = rgb[: rows * cs, : cols * cs]

    bins = config.histogram_bins
    n_cells = rows * cols
    hists = np.empty((n_cells, 6, bins), dtype=np.float64)
    for c in range(3):
        value_plane = rgb[..., c]
        grad_plane = _gradient_magnitude(value_plane)
        hists[:, c, :] = _per_cell_hist(_bin_indices(value_plane, bins), rows, cols, cs, bins)
        hists[:, 3 + c, :] = _per_cell_hist(_bin_indices(grad_plane, bins), rows, cols, cs, bins)
    hists /= float(cs * cs)

    blocks = rgb.reshape(rows, cs, cols, cs, 3)
    mean = blocks.mean(axis=(1, 3))
    std = blocks.std(axis=(1, 3))

    return CellGrid(
        rows=rows,
        cols=cols,
        cell_size=cs,
        bins=bins,
        hists=hists.reshape(rows, cols, 6, bins),
        mean=mean,
        std=std,
    )


def _per_cell_hist(idx: np.ndarray, rows: int, cols: int, cs: int, bins: int) -> np.ndarray:
    """Counts per (cell, bin) via one bincount over cell_id * bins + bin_id."""
    cell_id = (np.arange(rows * cs)[:, None] // cs) * cols + (np.arange(cols * cs)[None, :] // cs)
    combined = cell_id * bins + idx
    counts = np.bincount(combined.ravel(), minlength=rows * cols * bins)
    return counts.reshape(rows * cols, bins).astype(np.float64)


def _entropy_bits(hist: np.ndarray) -> np.ndarray:
    """Shannon entropy in bits along the last axis, with 0 log 0 = 0."""
    safe = np.where(hist > 0, hist, 1.0)
    return -(hist * np.log2(safe)).sum(axis=-1)


def js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence (base-2 logarithm), in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = (p + q) / 2.0
    jsd = _entropy_bits(m) - (_entropy_bits(p) + _entropy_bits(q)) / 2.0
    return float(max(jsd, 0.0))


def js_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Square root of the base-2 Jensen-Shannon divergence; a metric in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ParameterError(f"histogram shapes differ: {p.shape} vs {q.shape}")
    if abs(p.sum() - 1.0) > 1e-6 or abs(q.sum() - 1.0) > 1e-6:
        raise ParameterError("histograms must each sum to 1")
    return float(np.sqrt(js_divergence(p, q)))


class _PairwiseCompat:
    """Lazy, memoized all-six-histogram compatibility between cells.

    Stores 0 = unknown, 1 = compatible, 2 = incompatible. Distances are
    computed in vectorized batches the first time a pair is needed.
    """

    def __init__(self, hists: np.ndarray, threshold: float):
        self.hists = hists  # (N, 6, bins)
        self.thr2 = threshold * threshold  # compare divergences, not roots
        self.self_entropy = _entropy_bits(hists)  # (N, 6)
        n = hists.shape[0]
        self.state = np.zeros((n, n), dtype=np.int8)
        np.fill_diagonal(self.state, 1)

    def all_compatible(self, ids_a: np.ndarray, ids_b: np.ndarray) -> bool:
        """True iff every (a, b) pair from the cross product is compatible."""
        n = self.state.shape[0]
        ii = np.repeat(ids_a, len(ids_b))
        jj = np.tile(ids_b, len(ids_a))
        lo = np.minimum(ii, jj)
        hi = np.maximum(ii, jj)
        keys = np.unique(lo[lo != hi] * n + hi[lo != hi])
        if keys.size == 0:
            return True
        ii, jj = keys // n, keys % n
        states = self.state[ii, jj]
        if (states == 2).any():
            return False
        unknown = states == 0
        if not unknown.any():
            return True
        ui, uj = ii[unknown], jj[unknown]
        p = self.hists[ui]
        q = self.hists[uj]
        m = (p + q) / 2.0
        jsd = _entropy_bits(m) - (self.self_entropy[ui] + self.self_entropy[uj]) / 2.0
        ok = (jsd < self.thr2).all(axis=1)
        verdict = np.where(ok, 1, 2).astype(np.int8)
        self.state[ui, uj] = verdict
        self.state[uj, ui] = verdict
        return bool(ok.all())


def find_uniform_regions(grid: CellGrid, config: ExtractionConfig) -> list[Region]:
    """Greedy maximal-square search for blocks of pairwise-similar cells.

    For each anchor the largest square whose cell pairs all pass the six
    Jensen-Shannon checks is grown; squares of side > min_region_cells are
    kept, and overlaps are deduplicated keeping the larger (then the
    top-left-most) region. Results are deterministically ordered.
    """
    min_side = config.min_region_cells + 1
    if grid.rows < min_side or grid.cols < min_side:
        return []

    hists = grid.hists.reshape(grid.rows * grid.cols, 6, grid.bins)
    compat = _PairwiseCompat(hists, config.js_threshold)
    cols = grid.cols

    def cell_ids(row, col, side):
        rr = np.arange(row, row + side)
        cc = np.arange(col, col + side)
        return (rr[:, None] * cols + cc[None, :]).ravel()

    candidates: list[Region] = []
    for row in range(grid.rows):
        for col in range(grid.cols):
            max_side = min(grid.rows - row, grid.cols - col)
            if max_side < min_side:
                continue
            side = 1
            while side < max_side:
                new_side = side + 1
                ring = np.concatenate([
                    (row + side) * cols + np.arange(col, col + new_side),
                    np.arange(row, row + side) * cols + (col + side),
                ])
                square = cell_ids(row, col, new_side)
                if not compat.all_compatible(ring, square):
                    break
                side = new_side
            if side >= min_side:
                candidates.append(Region(row=row, col=col, side=side, cell_size=grid.cell_size))

    candidates.sort(key=lambda r: (-r.side, r.row, r.col))
    kept: list[Region] = []
    for cand in candidates:
        if not any(_overlaps(cand, other) for other in kept):
            kept.append(cand)
    return kept


def _overlaps(a: Region, b: Region) -> bool:
    return not (
        a.row + a.side <= b.row
        or b.row + b.side <= a.row
        or a.col + a.side <= b.col
        or b.col + b.side <= a.col
    )


def region_stats(image: np.ndarray, region: Region, config: ExtractionConfig) -> CellStats:
    """Aggregate stats of the whole region block, computed from its pixels."""
    rgb = _unit_rgb(image)
    y0, x0 = region.pixel_origin
    size = region.pixel_size
    block = rgb[y0 : y0 + size, x0 : x0 + size]
    return block_stats(block, config.histogram_bins)


def block_stats(block: np.ndarray, bins: int) -> CellStats:
    """Histogram/mean/std summary of one pixel block treated as a single cell."""
    n = block.shape[0] * block.shape[1]
    hists = np.empty((6, bins), dtype=np.float64)
    mean = np.empty(3)
    std = np.empty(3)
    for c in range(3):
        plane = block[..., c]
        hists[c] = np.bincount(_bin_indices(plane, bins).ravel(), minlength=bins)[:bins]
        grad = _gradient_magnitude(plane)
        hists[3 + c] = np.bincount(_bin_indices(grad, bins).ravel(), minlength=bins)[:bins]
        total = float(plane.sum())
        total_sq = float(np.square(plane).sum())
        mean[c] = total / n
        std[c] = np.sqrt(max(total_sq / n - mean[c] ** 2, 0.0))
    hists /= float(n)
    return CellStats(hists=hists, mean=mean, std=std)


def filter_degenerate(stats: CellStats, config: ExtractionConfig | None = None) -> bool:
    """Keep/discard decision; True means keep.

    A region is discarded when every RGB channel is degenerate: nearly
    constant, very dark, or very bright.
    """
    cfg = config or ExtractionConfig()
    degenerate = (
        (stats.std < cfg.std_min) | (stats.mean < cfg.mean_min) | (stats.mean > cfg.mean_max)
    )
    return not bool(degenerate.all())


def extract_texture(image: np.ndarray, region: Region, image_id: str = "",
                    config: ExtractionConfig | None = None) -> TextureTile:
    """Crop the region's pixel block and attach provenance and aggregate stats."""
    cfg = config or ExtractionConfig(cell_size=region.cell_size)
    rgb = _unit_rgb(image)
    y0, x0 = region.pixel_origin
    size = region.pixel_size
    if y0 < 0 or x0 < 0 or y0 + size > rgb.shape[0] or x0 + size > rgb.shape[1]:
        raise ParameterError(
            f"region {region} exceeds image bounds {rgb.shape[1]}x{rgb.shape[0]}"
        )
    block = rgb[y0 : y0 + size, x0 : x0 + size].copy()
    return TextureTile(
        pixels=block,
        image_id=image_id,
        origin_cells=(region.row, region.col),
        side_cells=region.side,
        cell_size=region.cell_size,
        stats=block_stats(block, cfg.histogram_bins),
    )


def extract_tiles(
    image: np.ndarray, image_id: str, config: ExtractionConfig | None = None
) -> tuple[list[TextureTile], list[RejectedRegion]]:
    """Full per-image pipeline: grid stats, region search, crop, degeneracy filter."""
    cfg = config or ExtractionConfig()
    rgb = _unit_rgb(image)  # converted once, shared by all downstream crops
    grid = compute_cell_stats(rgb, cfg)
    regions = find_uniform_regions(grid, cfg)
    tiles: list[TextureTile] = []
    rejected: list[RejectedRegion] = []
    for region in regions:
        tile = extract_texture(rgb, region, image_id=image_id, config=cfg)
        if filter_degenerate(tile.stats, cfg):
            tiles.append(tile)
        else:
            rejected.append(RejectedRegion(region=region, reason=_degeneracy_reason(tile.stats, cfg)))
    return tiles, rejected


def _degeneracy_reason(stats: CellStats, cfg: ExtractionConfig) -> str:
    parts = []
    for i, name in enumerate("RGB"):
        if stats.std[i] < cfg.std_min:
            parts.append(f"{name}: too uniform (std {stats.std[i]:.4f})")
        elif stats.mean[i] < cfg.mean_min:
            parts.append(f"{name}: too dark (mean {stats.mean[i]:.4f})")
        elif stats.mean[i] > cfg.mean_max:
            parts.append(f"{name}: too bright (mean {stats.mean[i]:.4f})")
    return "; ".join(parts)


def save_tile(tile: TextureTile, path: str | Path) -> None:
    imgio.save_png8(path, tile.pixels)


def tile_filename(tile: TextureTile) -> str:
    row, col = tile.origin_cells
    return f"{tile.image_id}__r{row:03d}_c{col:03d}_s{tile.side_cells:02d}.png"
