"""Command-line pipeline orchestration.

Subcommands cover every stage: extract-textures, make-materials, gen2d, gen3d,
validate-scenes, eval-triplet, eval-iou and preview. Runs are seeded and
reproducible; corpus items are processed in parallel with per-item fault
isolation, and every stage writes an atomic manifest stamped with the config
hash.

Exit codes: 0 success, 1 configuration/format error, 2 partial failures above
the configured rate.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from matscene import __version__, benchmetrics, imgio, pbrsynth, scene3d, scenegen2d, texextract
from matscene.config import PipelineConfig
from matscene.errors import ConfigurationError, MatsceneError, ParameterError
from matscene.imagemaps import sample_region_map, save_region_map
from matscene.runner import error_rate, run_batch, write_manifest
from matscene.seeding import derive_seed, rng_for, spawn_seeds
from matscene.texextract import TextureTile

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1
    try:
        config = _load_config(args)
        return args.func(args, config)
    except (ConfigurationError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MatsceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="matscene", description=__doc__)
    parser.add_argument("--version", action="version", version=f"matscene {__version__}")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="pipeline config JSON file")
        p.add_argument("--seed", type=int, default=None, help="global seed override")
        p.add_argument("--workers", type=int, default=None, help="worker process count override")

    p = sub.add_parser("extract-textures", help="mine uniform texture tiles from a corpus")
    common(p)
    p.add_argument("--corpus", required=True, nargs="+", help="corpus image directories")
    p.add_argument("--out", required=True, help="output pool directory")
    p.set_defaults(func=cmd_extract_textures)

    p = sub.add_parser("make-materials", help="synthesize PBR materials from a tile pool")
    common(p)
    p.add_argument("--tiles", required=True, help="texture tile pool directory")
    p.add_argument("--out", required=True, help="material pool directory")
    p.add_argument("--mixed", type=int, default=0, help="additional mixed materials to create")
    p.set_defaults(func=cmd_make_materials)

    p = sub.add_parser("gen2d", help="generate annotated 2D samples")
    common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--map-corpus", required=True, help="images whose channels drive region maps")
    p.add_argument("--tiles", required=True, help="texture tile pool directory")
    p.add_argument("--backgrounds", required=True, help="background image directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen2d)

    p = sub.add_parser("gen3d", help="generate validated 3D scene descriptors")
    common(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--map-corpus", required=True)
    p.add_argument("--assets", required=True, help="asset index JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen3d)

    p = sub.add_parser("validate-scenes", help="validate scene descriptor files")
    common(p)
    p.add_argument("--scenes", required=True, help="directory of scene_*.json files")
    p.add_argument("--assets", required=True)
    p.add_argument("--report", help="write the validation report JSON here")
    p.set_defaults(func=cmd_validate_scenes)

    p = sub.add_parser("eval-triplet", help="score predictions with the triplet metric")
    common(p)
    p.add_argument("--annotations", required=True, help="annotation JSON file or directory")
    p.add_argument("--predictions", required=True, help="prediction CSV file or directory")
    p.add_argument("--soft-mode", choices=["any_point", "anchor_relation"], default=None)
    p.add_argument("--report", help="write the score report JSON here")
    p.set_defaults(func=cmd_eval_triplet)

    p = sub.add_parser("eval-iou", help="score dense predictions with optimal-threshold IOU")
    common(p)
    p.add_argument("--masks", required=True, help="masks/<image_id>/<segment>.png directory")
    p.add_argument("--predictions", help="dense predictions <image_id>/index.json directory")
    p.add_argument("--points", type=int, default=None, help="query points per segment")
    p.add_argument("--emit-points", help="write sampled query points JSON here and exit")
    p.add_argument("--report", help="write the score report JSON here")
    p.set_defaults(func=cmd_eval_iou)

    p = sub.add_parser("preview", help="render color-coded annotation previews for a 2D dataset")
    common(p)
    p.add_argument("--dataset", required=True, help="gen2d output directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preview)

    return parser


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    return config


def _find_images(roots: list[str]) -> list[tuple[str, Path]]:
    """(stable item id, path) for every corpus image, sorted for determinism."""
    found: list[tuple[str, Path]] = []
    for root in roots:
        root_path = Path(root)
        if not root_path.is_dir():
            raise ConfigurationError(f"corpus root is not a directory: {root}")
        for path in sorted(root_path.rglob("*")):
            if path.suffix.lower() in IMAGE_EXTENSIONS and path.is_file():
                rel = path.relative_to(root_path).with_suffix("")
                item_id = "__".join(rel.parts)
                found.append((item_id, path))
    found.sort(key=lambda pair: pair[0])
    return found


def _exit_code(manifest, config: PipelineConfig) -> int:
    return 0 if error_rate(manifest) <= config.max_error_rate else 2


# --- extract-textures -------------------------------------------------------

def _extract_worker(path_str: str, image_id: str, out_root: str, config: PipelineConfig) -> dict:
    image = imgio.load_rgb(path_str)
    tiles, rejected = texextract.extract_tiles(image, image_id, config.extraction)
    out = Path(out_root)
    tile_files = []
    for tile in tiles:
        name = texextract.tile_filename(tile)
        texextract.save_tile(tile, out / "tiles" / name)
        tile_files.append(name)
    regions_report = {
        "image_id": image_id,
        "tiles": tile_files,
        "kept": [
            {"row": t.origin_cells[0], "col": t.origin_cells[1], "side": t.side_cells,
             "cell_size": t.cell_size,
             "mean": [round(float(v), 6) for v in t.stats.mean],
             "std": [round(float(v), 6) for v in t.stats.std]}
            for t in tiles
        ],
        "rejected": [
            {"row": r.region.row, "col": r.region.col, "side": r.region.side,
             "reason": r.reason}
            for r in rejected
        ],
    }
    imgio.atomic_write_json(out / "regions" / f"{image_id}.json", regions_report)
    return {"tiles": len(tiles), "rejected": len(rejected)}


def cmd_extract_textures(args, config: PipelineConfig) -> int:
    t0 = time.monotonic()
    images = _find_images(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    items = [(item_id, (str(path), item_id, str(out), config)) for item_id, path in images]
    results = run_batch(items, _extract_worker, workers=config.workers)
    extra = {r.item_id: r.value for r in results if r.status == "ok"}
    manifest = write_manifest(out / "manifest.json", "texture-pool", config.config_hash(),
                              config.seed, results, t0, extra_items=extra)
    total_tiles = sum(v.get("tiles", 0) for v in extra.values())
    print(f"extract-textures: {manifest.counts} tiles={total_tiles} -> {out}")
    return _exit_code(manifest, config)


# --- make-materials ---------------------------------------------------------

def _material_worker(tile_path: str, tile_id: str, out_root: str, seed: int,
                     config: PipelineConfig) -> dict:
    pixels = imgio.to_unit_float(imgio.load_rgb(tile_path))
    tile = TextureTile(pixels=pixels, image_id=tile_id, origin_cells=(0, 0),
                       side_cells=0, cell_size=config.extraction.cell_size, stats=None)
    material = pbrsynth.make_pbr(tile, derive_seed(seed, tile_id), config.augment)
    pbrsynth.save_material(material, Path(out_root) / tile_id)
    return {"material": tile_id}


def cmd_make_materials(args, config: PipelineConfig) -> int:
    t0 = time.monotonic()
    tiles_dir = Path(args.tiles)
    tile_paths = sorted(tiles_dir.glob("*.png"))
    if not tile_paths:
        raise ConfigurationError(f"no tiles found under {tiles_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    items = [(p.stem, (str(p), p.stem, str(out), config.seed, config)) for p in tile_paths]
    results = run_batch(items, _material_worker, workers=config.workers)

    base_ids = sorted(r.item_id for r in results if r.status == "ok")
    mix_results = []
    if args.mixed and len(base_ids) >= 2:
        for i in range(args.mixed):
            mix_id = f"mixed_{i:04d}"
            try:
                _make_mixed_material(base_ids, out, mix_id, derive_seed(config.seed, mix_id))
                mix_results.append((mix_id, "ok"))
            except MatsceneError as exc:
                mix_results.append((mix_id, f"error: {exc}"))
    manifest = write_manifest(out / "manifest.json", "material-pool", config.config_hash(),
                              config.seed, results, t0,
                              extra_items={m: {"mixed": status} for m, status in mix_results})
    print(f"make-materials: {manifest.counts} mixed={len(mix_results)} -> {out}")
    return _exit_code(manifest, config)


def _make_mixed_material(base_ids: list[str], pool: Path, mix_id: str, seed: int) -> None:
    rng = rng_for(seed)
    ia, ib = rng.choice(len(base_ids), size=2, replace=False)
    mode = "per_map" if rng.uniform() < 0.5 else "per_material"
    mat_a = pbrsynth.load_material(pool / base_ids[ia])
    mat_b = pbrsynth.load_material(pool / base_ids[ib])
    mixed = pbrsynth.mix_pbr(mat_a, mat_b, mode=mode, seed=seed)
    pbrsynth.save_material(mixed, pool / mix_id)


# --- gen2d ------------------------------------------------------------------

def _load_pool(directory: str, what: str) -> list[tuple[str, np.ndarray]]:
    paths = _find_images([directory])
    if not paths:
        raise ConfigurationError(f"empty {what} pool: {directory}")
    return [(item_id, imgio.to_unit_float(imgio.load_rgb(path))) for item_id, path in paths]


def cmd_gen2d(args, config: PipelineConfig) -> int:
    pools = scenegen2d.Batch2DPools(
        map_sources=_load_pool(args.map_corpus, "map source"),
        tiles=_load_pool(args.tiles, "tile"),
        backgrounds=_load_pool(args.backgrounds, "background"),
    )
    manifest = scenegen2d.generate_batch_2d(
        pools, args.count, config.seed, args.out,
        scene_config=config.scene2d, map_config=config.region_map,
        config_hash=config.config_hash(),
    )
    print(f"gen2d: {manifest['count']} samples -> {args.out}")
    return 0


# --- gen3d ------------------------------------------------------------------

def cmd_gen3d(args, config: PipelineConfig) -> int:
    t0 = time.monotonic()
    assets = scene3d.AssetIndex.from_file(args.assets)
    assets.require_catalogs()
    sources = _load_pool(args.map_corpus, "map source")
    out = Path(args.out)
    (out / "scenes").mkdir(parents=True, exist_ok=True)

    material_ids = sorted(assets.materials)
    results = []
    invalid = 0
    for index in range(args.count):
        item_id = f"{index:06d}"
        scene_seed = derive_seed(config.seed, f"scene/{item_id}")
        rng = rng_for(scene_seed)
        map_seed, build_seed = spawn_seeds(scene_seed, 2)

        src_id, src = sources[rng.integers(0, len(sources))]
        k = int(rng.integers(config.region_map.k_min, config.region_map.k_max + 1))
        region_map = sample_region_map(src, map_seed, k, config.region_map)
        map_dir = out / "maps" / item_id
        save_region_map(region_map, map_dir)

        materials = [material_ids[rng.integers(0, len(material_ids))] for _ in range(k)]
        desc = scene3d.build_scene_descriptor(
            assets, region_map, materials, build_seed,
            map_id=f"maps/{item_id}", config=config.scene3d,
        )
        report = scene3d.validate_descriptor(desc, assets)
        scene3d.save_descriptor(desc, out / "scenes" / f"scene_{item_id}.json")
        status = "ok" if report.passed else "error"
        invalid += 0 if report.passed else 1
        results.append((item_id, status, report))

    from matscene.runner import ItemResult
    item_results = [
        ItemResult(item_id=i, status=s, detail="" if r.passed else json.dumps(r.to_json_dict()))
        for i, s, r in results
    ]
    manifest = write_manifest(out / "manifest.json", "scene3d", config.config_hash(),
                              config.seed, item_results, t0)
    print(f"gen3d: {manifest.counts} -> {out}")
    return _exit_code(manifest, config)


def cmd_validate_scenes(args, config: PipelineConfig) -> int:
    assets = scene3d.AssetIndex.from_file(args.assets)
    scene_paths = sorted(Path(args.scenes).glob("scene_*.json"))
    if not scene_paths:
        raise ConfigurationError(f"no scene_*.json files under {args.scenes}")
    reports = {}
    failures = 0
    for path in scene_paths:
        desc = scene3d.load_descriptor(path)
        report = scene3d.validate_descriptor(desc, assets)
        reports[path.name] = report.to_json_dict()
        if not report.passed:
            failures += 1
            for f in report.failures:
                print(f"{path.name}: {f.rule}: {f.detail}", file=sys.stderr)
    if args.report:
        imgio.atomic_write_json(args.report, reports)
    print(f"validate-scenes: {len(scene_paths) - failures}/{len(scene_paths)} valid")
    return 0 if failures == 0 else 1


# --- evaluation -------------------------------------------------------------

def _annotation_files(path: str) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        if not files:
            raise ConfigurationError(f"no annotation JSON files under {path}")
        return files
    if not p.exists():
        raise ConfigurationError(f"annotations not found: {path}")
    return [p]


def cmd_eval_triplet(args, config: PipelineConfig) -> int:
    soft_mode = args.soft_mode or config.metrics.soft_mode
    pred_root = Path(args.predictions)
    per_image = {}
    overalls, softs = [], []
    for ann_path in _annotation_files(args.annotations):
        ann = benchmetrics.load_annotation(ann_path)
        csv_path = pred_root / f"{ann.image_id}.csv" if pred_root.is_dir() else pred_root
        if not csv_path.exists():
            raise ConfigurationError(f"missing predictions for {ann.image_id}: {csv_path}")
        pred = benchmetrics.load_sparse_csv(csv_path, len(ann.points))
        score = benchmetrics.triplet_score(ann, pred, soft_mode=soft_mode)
        per_image[ann.image_id] = score.to_json_dict()
        if not np.isnan(score.overall):
            overalls.append(score.overall)
        if not np.isnan(score.soft_only):
            softs.append(score.soft_only)

    report = {
        "metric": "triplet",
        "soft_mode": soft_mode,
        "images": per_image,
        "mean_overall": round(float(np.mean(overalls)), 6) if overalls else None,
        "mean_soft_only": round(float(np.mean(softs)), 6) if softs else None,
    }
    _print_triplet_table(report)
    if args.report:
        imgio.atomic_write_json(args.report, report)
    return 0


def _print_triplet_table(report: dict) -> None:
    print(f"{'image':<24} {'overall':>8} {'soft':>8} {'triplets':>9}")
    for image_id, scores in sorted(report["images"].items()):
        soft = scores["soft_only"]
        soft_text = f"{soft:8.4f}" if soft is not None and not np.isnan(soft) else "     n/a"
        print(f"{image_id:<24} {scores['overall']:8.4f} {soft_text} {scores['n_triplets']:9d}")
    print(f"{'MEAN':<24} {report['mean_overall']:8.4f}" +
          (f" {report['mean_soft_only']:8.4f}" if report["mean_soft_only"] is not None else "      n/a"))


def _load_mask_sets(masks_root: str) -> list[benchmetrics.GtMaskSet]:
    root = Path(masks_root)
    if not root.is_dir():
        raise ConfigurationError(f"masks root is not a directory: {masks_root}")
    sets = []
    for image_dir in sorted(d for d in root.iterdir() if d.is_dir()):
        masks = {}
        for mask_path in sorted(image_dir.glob("*.png")):
            with_img = imgio.load_png16_gray(mask_path)
            masks[mask_path.stem] = with_img > 0.5
        if masks:
            sets.append(benchmetrics.GtMaskSet(image_id=image_dir.name, masks=masks))
    if not sets:
        raise ConfigurationError(f"no segment masks found under {masks_root}")
    return sets


def cmd_eval_iou(args, config: PipelineConfig) -> int:
    points = args.points if args.points is not None else config.metrics.points_per_segment
    mask_sets = _load_mask_sets(args.masks)

    if args.emit_points:
        emitted = {}
        for mask_set in mask_sets:
            pts, empty = benchmetrics.sample_query_points(mask_set, points, config.seed)
            emitted[mask_set.image_id] = {
                "points": {seg: [[x, y] for x, y in coords] for seg, coords in pts.items()},
                "empty_segments": empty,
            }
        imgio.atomic_write_json(args.emit_points, {"seed": config.seed, "images": emitted})
        print(f"eval-iou: wrote query points for {len(emitted)} images -> {args.emit_points}")
        return 0

    if not args.predictions:
        raise ConfigurationError("eval-iou needs --predictions (or --emit-points)")
    pred_root = Path(args.predictions)
    samples = []
    for mask_set in mask_sets:
        index_path = pred_root / mask_set.image_id / "index.json"
        if not index_path.exists():
            raise ConfigurationError(f"missing dense predictions: {index_path}")
        samples.append((benchmetrics.load_dense_prediction(index_path), mask_set))

    result = benchmetrics.benchmark_iou(samples, points, config.seed)
    print(f"{'segment':<32} {'iou':>8}")
    for key, value in sorted(result.per_segment.items()):
        print(f"{key:<32} {value:8.4f}")
    print(f"{'MEAN':<32} {result.mean_iou:8.4f}   ({result.n_evaluations} evaluations)")
    if args.report:
        imgio.atomic_write_json(args.report, {"metric": "optimal_threshold_iou",
                                              **result.to_json_dict()})
    return 0


# --- preview ----------------------------------------------------------------

def cmd_preview(args, config: PipelineConfig) -> int:
    dataset = Path(args.dataset)
    sample_dirs = sorted((dataset / "samples").iterdir()) if (dataset / "samples").is_dir() else []
    if not sample_dirs:
        raise ConfigurationError(f"no samples under {dataset}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for sample_dir in sample_dirs:
        sample = scenegen2d.load_sample(sample_dir)
        preview = scenegen2d.annotation_preview(sample.gt_weights)
        imgio.save_png8(out / f"{sample_dir.name}_annotation.png", preview)
        imgio.save_png8(out / f"{sample_dir.name}_rgb.png", sample.rgb)
    print(f"preview: {len(sample_dirs)} samples -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
