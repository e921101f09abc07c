#!/usr/bin/env node
/**
 * bridge: render a scene.json descriptor to the standard annotated-sample
 * layout (rgb.png, gt_mat<K>.png, gt_bg.png, meta.json).
 *
 *   bridge --scene scene.json --assets assets.json --out DIR
 *          [--samples N] [--res WxH] [--annotation-only] [--validate-only]
 *          [--blender PATH]
 *
 * The default mode drives headless Blender (>= 4.0, Cycles). With
 * --annotation-only the built-in rasterizer projects the scene's annotation
 * planes without any renderer, which is also the mode exercised by CI.
 *
 * Exit codes: 0 success, 1 usage/validation error, 2 render failure.
 */

import * as fs from "fs";
import * as path from "path";
import { findBlender, generateBpyScript, runBlender } from "./blender";
import { loadObj, Mesh } from "./objmesh";
import { decodeGray16, encodeGray16 } from "./png";
import { rasterizeAnnotations, RegionMapPlanes } from "./raster";
import {
  AssetIndex,
  loadAssetIndex,
  loadDescriptor,
  SceneDescriptor,
  validateDescriptor,
} from "./schema";

interface Args {
  scene: string;
  assets: string;
  out: string;
  samples: number | null;
  resolution: [number, number] | null;
  annotationOnly: boolean;
  validateOnly: boolean;
  blender: string | undefined;
}

function usage(): string {
  return (
    "usage: bridge --scene scene.json --assets assets.json --out DIR\n" +
    "              [--samples N] [--res WxH] [--annotation-only]\n" +
    "              [--validate-only] [--blender PATH]"
  );
}

function parseArgs(argv: string[]): Args {
  const args: Partial<Args> = {
    samples: null,
    resolution: null,
    annotationOnly: false,
    validateOnly: false,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i++;
      if (i >= argv.length) throw new Error(`missing value for ${flag}`);
      return argv[i];
    };
    switch (flag) {
      case "--scene": args.scene = next(); break;
      case "--assets": args.assets = next(); break;
      case "--out": args.out = next(); break;
      case "--samples": args.samples = Number(next()); break;
      case "--res": {
        const m = /^(\d+)x(\d+)$/.exec(next());
        if (!m) throw new Error("--res expects WxH, e.g. 768x768");
        args.resolution = [Number(m[1]), Number(m[2])];
        break;
      }
      case "--annotation-only": args.annotationOnly = true; break;
      case "--validate-only": args.validateOnly = true; break;
      case "--blender": args.blender = next(); break;
      case "--help":
      case "-h":
        console.log(usage());
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  for (const required of ["scene", "assets", "out"] as const) {
    if (!args[required]) throw new Error(`--${required} is required\n${usage()}`);
  }
  return args as Args;
}

function resolveMapDir(scenePath: string, mapId: string): string | null {
  const sceneDir = path.dirname(path.resolve(scenePath));
  for (const base of [sceneDir, path.dirname(sceneDir)]) {
    const candidate = path.join(base, mapId);
    if (fs.existsSync(path.join(candidate, "region_00.png"))) {
      return candidate;
    }
  }
  return null;
}

function loadRegionPlanes(mapDir: string, k: number): RegionMapPlanes {
  const planes: Float64Array[] = [];
  let width = 0;
  let height = 0;
  for (let region = 0; region < k; region++) {
    const file = path.join(mapDir, `region_${String(region).padStart(2, "0")}.png`);
    const decoded = decodeGray16(fs.readFileSync(file));
    planes.push(decoded.plane);
    width = decoded.width;
    height = decoded.height;
  }
  return { width, height, planes };
}

function materialIds(desc: SceneDescriptor): string[] {
  const table = desc.objects[0]?.region_materials ?? {};
  const ids: string[] = [];
  for (let region = 0; region < desc.region_map.num_regions; region++) {
    const assign = table[String(region)];
    if (!assign) {
      ids.push(`unassigned_${region}`);
    } else if (assign.kind === "asset") {
      ids.push(assign.asset_id);
    } else {
      ids.push(`uniform_${region}`);
    }
  }
  return ids;
}

function writeMeta(outDir: string, desc: SceneDescriptor): void {
  const meta = {
    material_ids: materialIds(desc),
    num_materials: desc.region_map.num_regions,
    seed: desc.seed >= BigInt(Number.MAX_SAFE_INTEGER) ? desc.seed.toString() : Number(desc.seed),
  };
  fs.writeFileSync(path.join(outDir, "meta.json"), JSON.stringify(meta, null, 2) + "\n");
}

function renderAnnotationOnly(
  desc: SceneDescriptor,
  assets: AssetIndex,
  mapDir: string,
  outDir: string,
  resolution: [number, number],
): void {
  const meshes: Mesh[] = desc.objects.map((obj) => loadObj(assets.meshes[obj.mesh]));
  const regionPlanes = loadRegionPlanes(mapDir, desc.region_map.num_regions);
  const result = rasterizeAnnotations(desc, meshes, regionPlanes, resolution[0], resolution[1]);
  for (let region = 0; region < result.planes.length; region++) {
    fs.writeFileSync(
      path.join(outDir, `gt_mat${region}.png`),
      encodeGray16(result.planes[region], result.width, result.height),
    );
  }
  fs.writeFileSync(
    path.join(outDir, "gt_bg.png"),
    encodeGray16(result.background, result.width, result.height),
  );
  writeMeta(outDir, desc);
}

function finishBlenderOutputs(desc: SceneDescriptor, outDir: string): void {
  // Blender wrote one plane per region; the background is the residual.
  const k = desc.region_map.num_regions;
  let width = 0;
  let height = 0;
  let total: Float64Array | null = null;
  for (let region = 0; region < k; region++) {
    const file = path.join(outDir, `gt_mat${region}.png`);
    const decoded = decodeGray16(fs.readFileSync(file));
    width = decoded.width;
    height = decoded.height;
    if (total === null) total = new Float64Array(decoded.plane.length);
    for (let i = 0; i < decoded.plane.length; i++) total[i] += decoded.plane[i];
  }
  const background = new Float64Array(width * height);
  for (let i = 0; i < background.length; i++) {
    background[i] = Math.max(0, 1 - (total ? total[i] : 0));
  }
  fs.writeFileSync(path.join(outDir, "gt_bg.png"), encodeGray16(background, width, height));
  writeMeta(outDir, desc);
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`bridge: ${(err as Error).message}`);
    return 1;
  }

  let desc: SceneDescriptor;
  let assets: AssetIndex;
  try {
    desc = loadDescriptor(args.scene);
    assets = loadAssetIndex(args.assets);
  } catch (err) {
    console.error(`bridge: ${(err as Error).message}`);
    return 1;
  }

  const failures = validateDescriptor(desc, assets);
  for (const failure of failures) {
    console.error(`bridge: validation: ${failure.rule}: ${failure.detail}`);
  }
  if (failures.length > 0) {
    return 1;
  }
  if (args.validateOnly) {
    console.error("bridge: descriptor valid");
    return 0;
  }

  const mapDir = resolveMapDir(args.scene, desc.region_map.id);
  if (!mapDir) {
    console.error(`bridge: region map '${desc.region_map.id}' not found near ${args.scene}`);
    return 1;
  }
  const resolution = args.resolution ?? (desc.render.resolution as [number, number]);
  const samples = args.samples ?? desc.render.samples;
  fs.mkdirSync(args.out, { recursive: true });

  if (args.annotationOnly) {
    try {
      renderAnnotationOnly(desc, assets, mapDir, args.out, resolution);
    } catch (err) {
      console.error(`bridge: annotation render failed: ${(err as Error).message}`);
      return 2;
    }
    console.error(`bridge: annotation planes written to ${args.out}`);
    return 0;
  }

  const blenderBin = findBlender(args.blender);
  if (!blenderBin) {
    console.error("bridge: blender executable not found (install Blender >= 4.0 or pass --blender)");
    return 1;
  }
  const script = generateBpyScript(desc, assets, mapDir, args.out, {
    samples,
    resolution,
    seed: desc.seed,
  });
  const scriptPath = path.join(args.out, "bridge_script.py");
  fs.writeFileSync(scriptPath, script);
  const run = runBlender(blenderBin, scriptPath);
  if (run.code !== 0) {
    console.error(`bridge: render failed (exit ${run.code})`);
    console.error(run.stderr);
    return 2;
  }
  try {
    finishBlenderOutputs(desc, args.out);
  } catch (err) {
    console.error(`bridge: post-processing failed: ${(err as Error).message}`);
    return 2;
  }
  console.error(`bridge: rendered sample written to ${args.out}`);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
