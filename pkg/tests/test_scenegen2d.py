"""Texture tiling, scene composition and batch dataset generation."""

import json

import numpy as np
import pytest

from matscene.config import RegionMapConfig, Scene2DConfig
from matscene.errors import ConfigurationError, ParameterError
from matscene.imagemaps import SoftRegionMap, sample_region_map
from matscene.imgio import linear_to_srgb, read_json, srgb_to_linear
from matscene.scenegen2d import (
    Batch2DPools,
    ShadowSpec,
    annotation_preview,
    compose_scene_2d,
    generate_batch_2d,
    load_sample,
    tile_texture,
)


def hard_map(mask: np.ndarray) -> SoftRegionMap:
    """Single-region map with weights exactly the given 0/1 mask."""
    w = mask.astype(np.float64)
    return SoftRegionMap(width=mask.shape[1], height=mask.shape[0],
                         region_weights=w[None], background_weight=1.0 - w)


def split_map(h: int, w: int, w0: np.ndarray, w1: np.ndarray) -> SoftRegionMap:
    return SoftRegionMap(width=w, height=h, region_weights=np.stack([w0, w1]),
                         background_weight=1.0 - w0 - w1)


class TestTileTexture:
    def test_large_tile_is_plain_crop(self, rng):
        pixels = rng.uniform(0, 1, (50, 60, 3))
        out = tile_texture(pixels, 30, 40)
        assert np.array_equal(out, pixels[:30, :40])

    def test_constant_tile_constant_plane(self):
        out = tile_texture(np.full((8, 8, 3), 0.3), 20, 20)
        assert np.all(out == 0.3)

    def test_mirror_layout_of_asymmetric_2x2(self):
        # tile [[a, b], [c, d]] must expand to
        # [[a, b, b, a],
        #  [c, d, d, c],
        #  [c, d, d, c],
        #  [a, b, b, a]]
        a, b, c, d = 0.1, 0.2, 0.3, 0.4
        tile = np.array([[[a], [b]], [[c], [d]]] , dtype=float).reshape(2, 2, 1)
        tile = np.repeat(tile, 3, axis=2)
        out = tile_texture(tile, 4, 4)
        expected = np.array([
            [a, b, b, a],
            [c, d, d, c],
            [c, d, d, c],
            [a, b, b, a],
        ])
        assert np.array_equal(out[..., 0], expected)

    def test_covers_target_exactly(self, rng):
        out = tile_texture(rng.uniform(0, 1, (7, 5, 3)), 33, 19)
        assert out.shape == (33, 19, 3)


class TestComposeScene2D:
    def test_full_weight_flat_tile_covers_everything(self):
        mask = np.ones((12, 16))
        m = hard_map(mask)
        tile = np.full((4, 4, 3), 0.25)
        bg = np.zeros((12, 16, 3))
        sample = compose_scene_2d(m, [tile], bg, linear_blend=False)
        assert np.allclose(sample.rgb, 0.25)
        assert np.allclose(sample.gt_weights[0], 1.0)
        assert np.allclose(sample.background_weight, 0.0)

    def test_two_flat_tiles_half_weight_blend(self):
        h, w = 8, 8
        w0 = np.full((h, w), 0.5)
        w1 = np.full((h, w), 0.5)
        m = split_map(h, w, w0, w1)
        t0 = np.full((4, 4, 3), 0.2)
        t1 = np.full((4, 4, 3), 0.8)
        bg = np.zeros((h, w, 3))
        sample = compose_scene_2d(m, [t0, t1], bg, linear_blend=False)
        assert np.allclose(sample.rgb, 0.5, atol=1e-12)

    def test_linear_blend_matches_declared_formula(self, rng):
        h, w = 8, 8
        w0 = rng.uniform(0, 1, (h, w))
        m = hard_map(np.zeros((h, w)))
        m.region_weights[0] = w0
        m.background_weight = 1.0 - w0
        tile = np.full((4, 4, 3), 0.7)
        bg = np.full((h, w, 3), 0.1)
        sample = compose_scene_2d(m, [tile], bg, linear_blend=True)
        expected = linear_to_srgb(
            w0[..., None] * srgb_to_linear(np.full((h, w, 3), 0.7))
            + (1 - w0)[..., None] * srgb_to_linear(bg)
        )
        assert np.abs(sample.rgb - expected).max() < 1e-12

    def test_shadow_halves_rgb_and_leaves_gt(self, rng):
        h, w = 10, 10
        m = hard_map(np.ones((h, w)))
        tile = rng.uniform(0.1, 0.9, (h, w, 3))
        bg = np.zeros((h, w, 3))
        shadow = ShadowSpec(shadow_map=np.ones((h, w)), strength=0.5)
        plain = compose_scene_2d(m, [tile], bg, linear_blend=False)
        shaded = compose_scene_2d(m, [tile], bg, shadow=shadow, linear_blend=False)
        assert np.abs(shaded.rgb - 0.5 * plain.rgb).max() < 1e-12
        assert np.array_equal(shaded.gt_weights, plain.gt_weights)

    def test_shadow_never_brightens(self, rng):
        h, w = 16, 16
        img = (rng.uniform(0, 1, (h, w, 3)) * 255).astype(np.uint8)
        m = sample_region_map(img, seed=4, num_regions=2, config=RegionMapConfig(k_min=1, k_max=4))
        tiles = [rng.uniform(0, 1, (6, 6, 3)) for _ in range(2)]
        bg = rng.uniform(0, 1, (h, w, 3))
        shadow = ShadowSpec(shadow_map=rng.uniform(0, 1, (h, w)), strength=0.7)
        plain = compose_scene_2d(m, tiles, bg)
        shaded = compose_scene_2d(m, tiles, bg, shadow=shadow)
        assert (shaded.rgb <= plain.rgb + 1e-12).all()

    def test_hard_map_reproduces_texture_pixels_exactly(self, rng):
        h, w = 12, 12
        mask = (rng.uniform(0, 1, (h, w)) > 0.5).astype(float)
        m = hard_map(mask)
        tile = rng.uniform(0, 1, (h, w, 3))
        bg = rng.uniform(0, 1, (h, w, 3))
        sample = compose_scene_2d(m, [tile], bg, linear_blend=False)
        inside = mask.astype(bool)
        assert np.array_equal(sample.rgb[inside], tile[inside])
        assert np.array_equal(sample.rgb[~inside], bg[~inside])

    def test_background_resampled_to_map_size(self):
        m = hard_map(np.zeros((20, 30)))
        bg = np.full((7, 9, 3), 0.4)
        sample = compose_scene_2d(m, [np.full((4, 4, 3), 1.0)], bg, linear_blend=False)
        assert sample.rgb.shape == (20, 30, 3)
        assert np.allclose(sample.rgb, 0.4)

    def test_tile_count_mismatch_rejected(self):
        m = hard_map(np.ones((4, 4)))
        with pytest.raises(ParameterError):
            compose_scene_2d(m, [np.ones((2, 2, 3))] * 2, np.zeros((4, 4, 3)))

    def test_bad_shadow_strength_rejected(self):
        with pytest.raises(ParameterError):
            ShadowSpec(shadow_map=np.zeros((4, 4)), strength=1.5)


def small_pools(rng, n_sources=3, n_tiles=4, n_bg=2) -> Batch2DPools:
    def imgs(n, shape, prefix):
        return [(f"{prefix}{i}", rng.uniform(0, 1, shape)) for i in range(n)]

    return Batch2DPools(
        map_sources=imgs(n_sources, (48, 64, 3), "src"),
        tiles=imgs(n_tiles, (24, 24, 3), "tile"),
        backgrounds=imgs(n_bg, (48, 64, 3), "bg"),
    )


class TestGenerateBatch2D:
    def test_count_zero_writes_valid_empty_manifest(self, rng, tmp_path):
        manifest = generate_batch_2d(small_pools(rng), 0, seed=1, out_dir=tmp_path / "d")
        assert manifest["count"] == 0 and manifest["items"] == []
        on_disk = read_json(tmp_path / "d" / "manifest.json")
        assert on_disk["count"] == 0

    def test_same_seed_identical_bytes(self, rng, tmp_path):
        pools = small_pools(rng)
        cfg = Scene2DConfig()
        mcfg = RegionMapConfig()
        generate_batch_2d(pools, 3, seed=7, out_dir=tmp_path / "a", scene_config=cfg, map_config=mcfg)
        generate_batch_2d(pools, 3, seed=7, out_dir=tmp_path / "b", scene_config=cfg, map_config=mcfg)
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            a_bytes = (tmp_path / "a" / rel).read_bytes()
            b_bytes = (tmp_path / "b" / rel).read_bytes()
            if rel.name == "manifest.json":
                da, db = json.loads(a_bytes), json.loads(b_bytes)
                da.pop("timing"), db.pop("timing")
                assert da == db
            else:
                assert a_bytes == b_bytes, rel

    def test_different_seed_differs(self, rng, tmp_path):
        pools = small_pools(rng)
        generate_batch_2d(pools, 2, seed=1, out_dir=tmp_path / "a")
        generate_batch_2d(pools, 2, seed=2, out_dir=tmp_path / "b")
        a = (tmp_path / "a" / "samples" / "000000" / "rgb.png").read_bytes()
        b = (tmp_path / "b" / "samples" / "000000" / "rgb.png").read_bytes()
        assert a != b

    def test_every_sample_gt_sums_to_one(self, rng, tmp_path):
        generate_batch_2d(small_pools(rng), 6, seed=3, out_dir=tmp_path / "d")
        for sample_dir in sorted((tmp_path / "d" / "samples").iterdir()):
            sample = load_sample(sample_dir)
            total = sample.gt_weights.sum(axis=0) + sample.background_weight
            # 16-bit quantization: each plane contributes at most half a step
            assert np.abs(total - 1.0).max() <= (sample.gt_weights.shape[0] + 1) * 0.5 / 65535 + 1e-9

    def test_empty_pool_rejected(self, rng, tmp_path):
        pools = small_pools(rng)
        pools.tiles = []
        with pytest.raises(ConfigurationError):
            generate_batch_2d(pools, 1, seed=0, out_dir=tmp_path / "d")

    def test_sample_layout_and_meta(self, rng, tmp_path):
        generate_batch_2d(small_pools(rng), 1, seed=9, out_dir=tmp_path / "d")
        sample_dir = tmp_path / "d" / "samples" / "000000"
        names = {p.name for p in sample_dir.iterdir()}
        assert "rgb.png" in names and "meta.json" in names and "gt_bg.png" in names
        meta = read_json(sample_dir / "meta.json")
        assert len([n for n in names if n.startswith("gt_mat")]) == meta["num_materials"]
        assert len(meta["material_ids"]) == meta["num_materials"]


class TestAnnotationPreview:
    def test_background_black_and_mixtures_blend(self):
        weights = np.zeros((2, 4, 4))
        weights[0, :2] = 1.0
        weights[1, 2, :] = 0.5
        preview = annotation_preview(weights)
        assert np.all(preview[3] == 0.0)  # pure background row
        assert preview[0].max() > 0.0
        half = preview[2]
        full_rows = annotation_preview(np.stack([np.zeros((4, 4)), np.ones((4, 4))]))[2]
        assert np.allclose(half, 0.5 * full_rows)
