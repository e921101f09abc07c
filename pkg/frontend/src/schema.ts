/**
 * Typed scene.json schema (version 1): parsing, validation and a serializer
 * that reproduces the generator's output byte for byte (2-space indent,
 * sorted keys, CPython float repr, exact integers).
 */

import * as fs from "fs";
import { parseRawJson, RawJson, RawNumber } from "./json";
import { pyFloatRepr, pyIntRepr, pyJsonString } from "./pyfloat";

export const SCHEMA_VERSION = 1;

export interface Transform {
  position: number[];
  rotation_euler: number[];
  scale: number;
}

export type MaterialAssignment =
  | { kind: "asset"; asset_id: string }
  | { kind: "uniform"; albedo: number[]; properties: Record<string, number> };

export interface ObjectSpec {
  mesh: string;
  transform: Transform;
  uv_map: string;
  region_materials: Record<string, MaterialAssignment>;
}

export interface DistractorSpec {
  mesh: string;
  transform: Transform;
  material: MaterialAssignment;
}

export interface GroundSpec {
  mesh: string;
  size: number;
  material: MaterialAssignment;
}

export interface SceneDescriptor {
  schema_version: number;
  seed: bigint;
  region_map: { id: string; num_regions: number };
  objects: ObjectSpec[];
  distractors: DistractorSpec[];
  ground: GroundSpec | null;
  hdri: { id: string; rotation: number };
  lights: { type: string; position: number[]; power: number }[];
  camera: { position: number[]; look_at: number[]; focal_length_mm: number };
  render: { resolution: number[]; samples: number };
}

// --- parsing ----------------------------------------------------------------

class SchemaError extends Error {}

function asObject(value: RawJson, where: string): { [key: string]: RawJson } {
  if (value === null || typeof value !== "object" || Array.isArray(value) || value instanceof RawNumber) {
    throw new SchemaError(`${where}: expected object`);
  }
  return value;
}

function asArray(value: RawJson, where: string): RawJson[] {
  if (!Array.isArray(value)) {
    throw new SchemaError(`${where}: expected array`);
  }
  return value;
}

function asString(value: RawJson, where: string): string {
  if (typeof value !== "string") {
    throw new SchemaError(`${where}: expected string`);
  }
  return value;
}

function asFloat(value: RawJson, where: string): number {
  if (!(value instanceof RawNumber)) {
    throw new SchemaError(`${where}: expected number`);
  }
  return value.asFloat();
}

function asSmallInt(value: RawJson, where: string): number {
  if (!(value instanceof RawNumber)) {
    throw new SchemaError(`${where}: expected integer`);
  }
  return value.asSmallInt();
}

function floatArray(value: RawJson, where: string): number[] {
  return asArray(value, where).map((v, i) => asFloat(v, `${where}[${i}]`));
}

function parseAssignment(value: RawJson, where: string): MaterialAssignment {
  const obj = asObject(value, where);
  const kind = asString(obj.kind, `${where}.kind`);
  if (kind === "asset") {
    return { kind, asset_id: asString(obj.asset_id, `${where}.asset_id`) };
  }
  if (kind === "uniform") {
    const props = asObject(obj.properties, `${where}.properties`);
    const properties: Record<string, number> = {};
    for (const key of Object.keys(props)) {
      properties[key] = asFloat(props[key], `${where}.properties.${key}`);
    }
    return { kind, albedo: floatArray(obj.albedo, `${where}.albedo`), properties };
  }
  throw new SchemaError(`${where}: unknown material kind ${JSON.stringify(kind)}`);
}

function parseTransform(value: RawJson, where: string): Transform {
  const obj = asObject(value, where);
  return {
    position: floatArray(obj.position, `${where}.position`),
    rotation_euler: floatArray(obj.rotation_euler, `${where}.rotation_euler`),
    scale: asFloat(obj.scale, `${where}.scale`),
  };
}

export function parseDescriptor(text: string): SceneDescriptor {
  const root = asObject(parseRawJson(text), "descriptor");
  const regionMap = asObject(root.region_map, "region_map");
  const hdri = asObject(root.hdri, "hdri");
  const camera = asObject(root.camera, "camera");
  const render = asObject(root.render, "render");
  const seed = root.seed;
  if (!(seed instanceof RawNumber)) {
    throw new SchemaError("seed: expected integer");
  }
  return {
    schema_version: asSmallInt(root.schema_version, "schema_version"),
    seed: seed.asInt(),
    region_map: {
      id: asString(regionMap.id, "region_map.id"),
      num_regions: asSmallInt(regionMap.num_regions, "region_map.num_regions"),
    },
    objects: asArray(root.objects, "objects").map((o, i) => {
      const obj = asObject(o, `objects[${i}]`);
      const table = asObject(obj.region_materials, `objects[${i}].region_materials`);
      const regionMaterials: Record<string, MaterialAssignment> = {};
      for (const key of Object.keys(table)) {
        regionMaterials[key] = parseAssignment(table[key], `objects[${i}].region_materials.${key}`);
      }
      return {
        mesh: asString(obj.mesh, `objects[${i}].mesh`),
        transform: parseTransform(obj.transform, `objects[${i}].transform`),
        uv_map: asString(obj.uv_map, `objects[${i}].uv_map`),
        region_materials: regionMaterials,
      };
    }),
    distractors: asArray(root.distractors, "distractors").map((d, i) => {
      const obj = asObject(d, `distractors[${i}]`);
      return {
        mesh: asString(obj.mesh, `distractors[${i}].mesh`),
        transform: parseTransform(obj.transform, `distractors[${i}].transform`),
        material: parseAssignment(obj.material, `distractors[${i}].material`),
      };
    }),
    ground: root.ground === null ? null : (() => {
      const obj = asObject(root.ground, "ground");
      return {
        mesh: asString(obj.mesh, "ground.mesh"),
        size: asFloat(obj.size, "ground.size"),
        material: parseAssignment(obj.material, "ground.material"),
      };
    })(),
    hdri: {
      id: asString(hdri.id, "hdri.id"),
      rotation: asFloat(hdri.rotation, "hdri.rotation"),
    },
    lights: asArray(root.lights, "lights").map((l, i) => {
      const obj = asObject(l, `lights[${i}]`);
      return {
        type: asString(obj.type, `lights[${i}].type`),
        position: floatArray(obj.position, `lights[${i}].position`),
        power: asFloat(obj.power, `lights[${i}].power`),
      };
    }),
    camera: {
      position: floatArray(camera.position, "camera.position"),
      look_at: floatArray(camera.look_at, "camera.look_at"),
      focal_length_mm: asFloat(camera.focal_length_mm, "camera.focal_length_mm"),
    },
    render: {
      resolution: asArray(render.resolution, "render.resolution")
        .map((v, i) => asSmallInt(v, `render.resolution[${i}]`)),
      samples: asSmallInt(render.samples, "render.samples"),
    },
  };
}

export function loadDescriptor(path: string): SceneDescriptor {
  return parseDescriptor(fs.readFileSync(path, "utf-8"));
}

// --- serialization -----------------------------------------------------------

function indentBlock(entries: string[], open: string, close: string, pad: string): string {
  if (entries.length === 0) {
    return open + close;
  }
  const inner = entries.map((e) => pad + "  " + e).join(",\n");
  return `${open}\n${inner}\n${pad}${close}`;
}

function emitFloatArray(values: number[], pad: string): string {
  return indentBlock(values.map(pyFloatRepr), "[", "]", pad);
}

function emitAssignment(a: MaterialAssignment, pad: string): string {
  if (a.kind === "asset") {
    return indentBlock(
      [`"asset_id": ${pyJsonString(a.asset_id)}`, `"kind": "asset"`],
      "{", "}", pad,
    );
  }
  const inner = pad + "  ";
  const propKeys = Object.keys(a.properties).sort();
  const props = indentBlock(
    propKeys.map((k) => `${pyJsonString(k)}: ${pyFloatRepr(a.properties[k])}`),
    "{", "}", inner,
  );
  return indentBlock(
    [
      `"albedo": ${emitFloatArray(a.albedo, inner)}`,
      `"kind": "uniform"`,
      `"properties": ${props}`,
    ],
    "{", "}", pad,
  );
}

function emitTransform(t: Transform, pad: string): string {
  const inner = pad + "  ";
  return indentBlock(
    [
      `"position": ${emitFloatArray(t.position, inner)}`,
      `"rotation_euler": ${emitFloatArray(t.rotation_euler, inner)}`,
      `"scale": ${pyFloatRepr(t.scale)}`,
    ],
    "{", "}", pad,
  );
}

export function serializeDescriptor(desc: SceneDescriptor): string {
  const pad0 = "";
  const pad1 = "  ";
  const pad2 = "    ";

  const camera = indentBlock(
    [
      `"focal_length_mm": ${pyFloatRepr(desc.camera.focal_length_mm)}`,
      `"look_at": ${emitFloatArray(desc.camera.look_at, pad2)}`,
      `"position": ${emitFloatArray(desc.camera.position, pad2)}`,
    ],
    "{", "}", pad1,
  );

  const distractors = indentBlock(
    desc.distractors.map((d) =>
      indentBlock(
        [
          `"material": ${emitAssignment(d.material, pad2 + "  ")}`,
          `"mesh": ${pyJsonString(d.mesh)}`,
          `"transform": ${emitTransform(d.transform, pad2 + "  ")}`,
        ],
        "{", "}", pad2,
      ),
    ),
    "[", "]", pad1,
  );

  const ground = desc.ground === null
    ? "null"
    : indentBlock(
        [
          `"material": ${emitAssignment(desc.ground.material, pad2)}`,
          `"mesh": ${pyJsonString(desc.ground.mesh)}`,
          `"size": ${pyFloatRepr(desc.ground.size)}`,
        ],
        "{", "}", pad1,
      );

  const hdri = indentBlock(
    [
      `"id": ${pyJsonString(desc.hdri.id)}`,
      `"rotation": ${pyFloatRepr(desc.hdri.rotation)}`,
    ],
    "{", "}", pad1,
  );

  const lights = indentBlock(
    desc.lights.map((l) =>
      indentBlock(
        [
          `"position": ${emitFloatArray(l.position, pad2 + "  ")}`,
          `"power": ${pyFloatRepr(l.power)}`,
          `"type": ${pyJsonString(l.type)}`,
        ],
        "{", "}", pad2,
      ),
    ),
    "[", "]", pad1,
  );

  const objects = indentBlock(
    desc.objects.map((o) => {
      const tableKeys = Object.keys(o.region_materials).sort();
      const table = indentBlock(
        tableKeys.map(
          (k) => `${pyJsonString(k)}: ${emitAssignment(o.region_materials[k], pad2 + "    ")}`,
        ),
        "{", "}", pad2 + "  ",
      );
      return indentBlock(
        [
          `"mesh": ${pyJsonString(o.mesh)}`,
          `"region_materials": ${table}`,
          `"transform": ${emitTransform(o.transform, pad2 + "  ")}`,
          `"uv_map": ${pyJsonString(o.uv_map)}`,
        ],
        "{", "}", pad2,
      );
    }),
    "[", "]", pad1,
  );

  const regionMap = indentBlock(
    [
      `"id": ${pyJsonString(desc.region_map.id)}`,
      `"num_regions": ${pyIntRepr(desc.region_map.num_regions)}`,
    ],
    "{", "}", pad1,
  );

  const render = indentBlock(
    [
      `"resolution": ${indentBlock(desc.render.resolution.map(pyIntRepr), "[", "]", pad2)}`,
      `"samples": ${pyIntRepr(desc.render.samples)}`,
    ],
    "{", "}", pad1,
  );

  const body = indentBlock(
    [
      `"camera": ${camera}`,
      `"distractors": ${distractors}`,
      `"ground": ${ground}`,
      `"hdri": ${hdri}`,
      `"lights": ${lights}`,
      `"objects": ${objects}`,
      `"region_map": ${regionMap}`,
      `"render": ${render}`,
      `"schema_version": ${pyIntRepr(desc.schema_version)}`,
      `"seed": ${pyIntRepr(desc.seed)}`,
    ],
    "{", "}", pad0,
  );
  return body + "\n";
}

// --- asset index ---------------------------------------------------------------

export interface AssetIndex {
  meshes: Record<string, string>;
  hdris: Record<string, string>;
  materials: Record<string, string>;
}

export function loadAssetIndex(path: string): AssetIndex {
  const raw = JSON.parse(fs.readFileSync(path, "utf-8"));
  const index: AssetIndex = { meshes: {}, hdris: {}, materials: {} };
  for (const catalog of ["meshes", "hdris", "materials"] as const) {
    for (const entry of raw[catalog] ?? []) {
      index[catalog][entry.id] = entry.path;
    }
  }
  return index;
}

// --- validation ------------------------------------------------------------------

export interface ValidationFailure {
  rule: string;
  detail: string;
}

export function validateDescriptor(
  desc: SceneDescriptor,
  assets: AssetIndex | null = null,
): ValidationFailure[] {
  const failures: ValidationFailure[] = [];
  const fail = (rule: string, detail: string) => failures.push({ rule, detail });

  if (desc.schema_version !== SCHEMA_VERSION) {
    fail("schema_version", `unsupported schema version ${desc.schema_version}`);
  }
  if (desc.objects.length === 0) {
    fail("has_objects", "descriptor has no primary objects");
  }
  const k = desc.region_map.num_regions;
  const checkAssignment = (a: MaterialAssignment, where: string) => {
    if (a.kind === "asset") {
      if (assets && !(a.asset_id in assets.materials)) {
        fail("material_resolves", `${where}: unresolved asset '${a.asset_id}'`);
      }
    } else {
      const values = [...a.albedo, ...Object.values(a.properties)];
      if (!values.every((v) => v >= 0 && v <= 1)) {
        fail("uniform_range", `${where}: uniform value outside [0,1]`);
      }
    }
  };
  for (const [i, o] of desc.objects.entries()) {
    if (assets && !(o.mesh in assets.meshes)) {
      fail("mesh_resolves", `objects[${i}]: unresolved asset '${o.mesh}'`);
    }
    for (const key of Object.keys(o.region_materials)) {
      const region = Number(key);
      if (!Number.isInteger(region) || region < 0 || region >= k) {
        fail("region_known", `objects[${i}]: unknown region ${key} (map has ${k})`);
      }
      checkAssignment(o.region_materials[key], `objects[${i}].region_materials.${key}`);
    }
  }
  for (const [i, d] of desc.distractors.entries()) {
    if (assets && !(d.mesh in assets.meshes)) {
      fail("mesh_resolves", `distractors[${i}]: unresolved asset '${d.mesh}'`);
    }
    checkAssignment(d.material, `distractors[${i}].material`);
  }
  if (desc.ground) {
    if (assets && !(desc.ground.mesh in assets.meshes)) {
      fail("mesh_resolves", `ground: unresolved asset '${desc.ground.mesh}'`);
    }
    checkAssignment(desc.ground.material, "ground.material");
  }
  if (assets && !(desc.hdri.id in assets.hdris)) {
    fail("hdri_resolves", `unresolved asset '${desc.hdri.id}'`);
  }

  if (desc.objects.length > 0) {
    const positions = desc.objects.map((o) => o.transform.position);
    const center = [0, 1, 2].map(
      (axis) => positions.reduce((acc, p) => acc + p[axis], 0) / positions.length,
    );
    const distTo = (p: number[]) =>
      Math.hypot(p[0] - center[0], p[1] - center[1], p[2] - center[2]);
    const spread = Math.max(...positions.map(distTo), 0);
    const radius = spread + Math.max(...desc.objects.map((o) => o.transform.scale));
    if (distTo(desc.camera.look_at) > radius + 1e-5) {
      fail("camera_targets_scene", `look_at leaves the object bound radius ${radius.toFixed(3)}`);
    }
  }
  for (const li of desc.lights) {
    if (!(li.power > 0)) {
      fail("light_power", `non-positive light power ${li.power}`);
    }
  }
  if (!desc.render.resolution.every((v) => v > 0)) {
    fail("render_resolution", `bad resolution ${desc.render.resolution}`);
  }
  if (!(desc.render.samples > 0)) {
    fail("render_samples", `bad sample count ${desc.render.samples}`);
  }
  if (!(desc.camera.focal_length_mm > 0)) {
    fail("camera_focal", `bad focal length ${desc.camera.focal_length_mm}`);
  }
  return failures;
}
