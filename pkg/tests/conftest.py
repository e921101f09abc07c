"""Shared fixtures: synthetic images with known structure."""

import numpy as np
import pytest

from matscene.texextract import TextureTile, block_stats


def make_planted_image(size: int = 320, block: int = 280, seed: int = 42) -> np.ndarray:
    """A stationary mid-range noise texture in the upper-left block, a very
    different bright narrow-band texture elsewhere. uint8 RGB."""
    rng = np.random.default_rng(seed)
    outer = rng.uniform(0.86, 0.94, (size, size, 3))
    inner = rng.uniform(0.25, 0.75, (size, size, 3))
    img = outer
    img[:block, :block] = inner[:block, :block]
    return (img * 255).astype(np.uint8)


def make_noise_tile(side: int = 80, seed: int = 0, low: float = 0.2, high: float = 0.8) -> TextureTile:
    rng = np.random.default_rng(seed)
    pixels = rng.uniform(low, high, (side, side, 3))
    return TextureTile(
        pixels=pixels,
        image_id=f"noise{seed}",
        origin_cells=(0, 0),
        side_cells=side // 40 if side >= 40 else 1,
        cell_size=40,
        stats=block_stats(pixels, 32),
    )


def random_histogram(rng: np.random.Generator, bins: int = 32) -> np.ndarray:
    h = rng.uniform(0.0, 1.0, bins)
    # occasional sparse histograms exercise the 0 log 0 branches
    if rng.uniform() < 0.3:
        h[rng.uniform(size=bins) < 0.5] = 0.0
    if h.sum() == 0:
        h[0] = 1.0
    return h / h.sum()


@pytest.fixture
def planted_image() -> np.ndarray:
    return make_planted_image()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
