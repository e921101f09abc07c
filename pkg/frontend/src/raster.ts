/**
 * Deterministic software rasterizer for annotation planes.
 *
 * Projects the descriptor's primary objects through the camera and samples
 * the scene's soft region map over each surface, producing one plane per map
 * region plus the background residual: the same ground-truth layout the 2D
 * generator emits. Used to validate descriptors geometrically and as the
 * no-renderer annotation path.
 */

import { Mesh } from "./objmesh";
import { SceneDescriptor, Transform } from "./schema";

export type Vec3 = [number, number, number];

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function normalize(a: Vec3): Vec3 {
  const n = Math.hypot(a[0], a[1], a[2]);
  if (n === 0) return [0, 0, 1];
  return [a[0] / n, a[1] / n, a[2] / n];
}

/** Blender-style XYZ euler: rotate about X, then Y, then Z. */
export function applyTransform(t: Transform, v: Vec3): Vec3 {
  const [rx, ry, rz] = t.rotation_euler;
  let [x, y, z] = [v[0] * t.scale, v[1] * t.scale, v[2] * t.scale];
  let c = Math.cos(rx), s = Math.sin(rx);
  [y, z] = [y * c - z * s, y * s + z * c];
  c = Math.cos(ry); s = Math.sin(ry);
  [x, z] = [x * c + z * s, -x * s + z * c];
  c = Math.cos(rz); s = Math.sin(rz);
  [x, y] = [x * c - y * s, x * s + y * c];
  return [x + t.position[0], y + t.position[1], z + t.position[2]];
}

export interface Camera {
  position: Vec3;
  forward: Vec3;
  right: Vec3;
  up: Vec3;
  /** focal length in pixels for the given output width (36mm sensor). */
  focalPx: number;
}

export const SENSOR_WIDTH_MM = 36;

export function makeCamera(
  position: number[],
  lookAt: number[],
  focalLengthMm: number,
  width: number,
): Camera {
  const pos = position as Vec3;
  const forward = normalize(sub(lookAt as Vec3, pos));
  const worldUp: Vec3 = Math.abs(forward[2]) > 0.999 ? [0, 1, 0] : [0, 0, 1];
  const right = normalize(cross(forward, worldUp));
  const up = cross(right, forward);
  const focalPx = (focalLengthMm / SENSOR_WIDTH_MM) * width;
  return { position: pos, forward, right, up, focalPx };
}

/** Project to pixel coordinates; returns null behind the camera. */
export function project(
  cam: Camera,
  v: Vec3,
  width: number,
  height: number,
): { x: number; y: number; z: number } | null {
  const d = sub(v, cam.position);
  const z = dot(d, cam.forward);
  if (z <= 1e-9) return null;
  const x = dot(d, cam.right);
  const y = dot(d, cam.up);
  return {
    x: width / 2 + (x / z) * cam.focalPx,
    y: height / 2 - (y / z) * cam.focalPx,
    z,
  };
}

export interface RegionMapPlanes {
  width: number;
  height: number;
  /** one plane per region, row-major floats in [0, 1] */
  planes: Float64Array[];
}

export interface RasterResult {
  width: number;
  height: number;
  /** per-region annotation planes */
  planes: Float64Array[];
  /** background residual */
  background: Float64Array;
}

interface SceneSurface {
  mesh: Mesh;
  transform: Transform;
  uvMode: string;
}

/** Bilinear sample with edge clamping; uv in [0, 1], v=0 at the top row. */
export function samplePlane(
  plane: Float64Array,
  width: number,
  height: number,
  u: number,
  v: number,
): number {
  const fx = Math.min(Math.max(u, 0), 1) * (width - 1);
  const fy = Math.min(Math.max(v, 0), 1) * (height - 1);
  const x0 = Math.floor(fx);
  const y0 = Math.floor(fy);
  const x1 = Math.min(x0 + 1, width - 1);
  const y1 = Math.min(y0 + 1, height - 1);
  const wx = fx - x0;
  const wy = fy - y0;
  const top = plane[y0 * width + x0] * (1 - wx) + plane[y0 * width + x1] * wx;
  const bottom = plane[y1 * width + x0] * (1 - wx) + plane[y1 * width + x1] * wx;
  return top * (1 - wy) + bottom * wy;
}

export function rasterizeAnnotations(
  desc: SceneDescriptor,
  meshes: Mesh[],
  regionMap: RegionMapPlanes,
  width: number,
  height: number,
): RasterResult {
  const cam = makeCamera(desc.camera.position, desc.camera.look_at, desc.camera.focal_length_mm, width);
  const k = desc.region_map.num_regions;

  const zBuffer = new Float64Array(width * height).fill(Infinity);
  const uBuffer = new Float64Array(width * height).fill(-1);
  const vBuffer = new Float64Array(width * height).fill(-1);
  const hit = new Uint8Array(width * height);

  desc.objects.forEach((obj, index) => {
    const surface: SceneSurface = { mesh: meshes[index], transform: obj.transform, uvMode: obj.uv_map };
    rasterizeSurface(surface, cam, width, height, zBuffer, uBuffer, vBuffer, hit);
  });

  const planes = Array.from({ length: k }, () => new Float64Array(width * height));
  const background = new Float64Array(width * height).fill(1);
  for (let i = 0; i < width * height; i++) {
    if (!hit[i]) continue;
    let covered = 0;
    for (let r = 0; r < k; r++) {
      const w = samplePlane(regionMap.planes[r], regionMap.width, regionMap.height, uBuffer[i], 1 - vBuffer[i]);
      planes[r][i] = w;
      covered += w;
    }
    background[i] = Math.max(0, 1 - covered);
  }
  return { width, height, planes, background };
}

function rasterizeSurface(
  surface: SceneSurface,
  cam: Camera,
  width: number,
  height: number,
  zBuffer: Float64Array,
  uBuffer: Float64Array,
  vBuffer: Float64Array,
  hit: Uint8Array,
): void {
  const { mesh, transform } = surface;
  const world = mesh.vertices.map((v) => applyTransform(transform, v as Vec3));
  const projected = world.map((v) => project(cam, v, width, height));
  const boxUv = surface.uvMode !== "native" || mesh.uvs.length === 0
    ? boxProjectionUvs(mesh)
    : null;

  for (const tri of mesh.triangles) {
    const p0 = projected[tri.v[0]];
    const p1 = projected[tri.v[1]];
    const p2 = projected[tri.v[2]];
    if (!p0 || !p1 || !p2) continue;
    const uv0 = triUv(mesh, boxUv, tri, 0);
    const uv1 = triUv(mesh, boxUv, tri, 1);
    const uv2 = triUv(mesh, boxUv, tri, 2);

    const minX = Math.max(0, Math.floor(Math.min(p0.x, p1.x, p2.x)));
    const maxX = Math.min(width - 1, Math.ceil(Math.max(p0.x, p1.x, p2.x)));
    const minY = Math.max(0, Math.floor(Math.min(p0.y, p1.y, p2.y)));
    const maxY = Math.min(height - 1, Math.ceil(Math.max(p0.y, p1.y, p2.y)));
    const area = edge(p0, p1, p2);
    if (area === 0) continue;

    for (let y = minY; y <= maxY; y++) {
      for (let x = minX; x <= maxX; x++) {
        const px = { x: x + 0.5, y: y + 0.5 };
        let w0 = edge(p1, p2, px);
        let w1 = edge(p2, p0, px);
        let w2 = edge(p0, p1, px);
        if (area < 0) {
          w0 = -w0; w1 = -w1; w2 = -w2;
        }
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const norm = w0 + w1 + w2;
        if (norm === 0) continue;
        const b0 = w0 / norm, b1 = w1 / norm, b2 = w2 / norm;
        // perspective-correct interpolation via 1/z
        const invZ = b0 / p0.z + b1 / p1.z + b2 / p2.z;
        const z = 1 / invZ;
        const idx = y * width + x;
        if (z >= zBuffer[idx]) continue;
        zBuffer[idx] = z;
        uBuffer[idx] = z * (b0 * uv0[0] / p0.z + b1 * uv1[0] / p1.z + b2 * uv2[0] / p2.z);
        vBuffer[idx] = z * (b0 * uv0[1] / p0.z + b1 * uv1[1] / p1.z + b2 * uv2[1] / p2.z);
        hit[idx] = 1;
      }
    }
  }
}

function edge(
  a: { x: number; y: number },
  b: { x: number; y: number },
  c: { x: number; y: number },
): number {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

function triUv(
  mesh: Mesh,
  boxUv: number[][] | null,
  tri: Mesh["triangles"][number],
  corner: number,
): [number, number] {
  if (boxUv) {
    const uv = boxUv[tri.v[corner]];
    return [uv[0], uv[1]];
  }
  const ti = tri.t[corner];
  if (ti >= 0 && ti < mesh.uvs.length) {
    const uv = mesh.uvs[ti];
    return [uv[0], uv[1]];
  }
  return [0, 0];
}

/** Planar projection onto the dominant axes of the object-space bounding box. */
function boxProjectionUvs(mesh: Mesh): number[][] {
  if (mesh.vertices.length === 0) return [];
  const mins = [Infinity, Infinity, Infinity];
  const maxs = [-Infinity, -Infinity, -Infinity];
  for (const v of mesh.vertices) {
    for (let axis = 0; axis < 3; axis++) {
      mins[axis] = Math.min(mins[axis], v[axis]);
      maxs[axis] = Math.max(maxs[axis], v[axis]);
    }
  }
  const extents = maxs.map((m, axis) => Math.max(m - mins[axis], 1e-12));
  const flattest = extents.indexOf(Math.min(...extents));
  const [ua, va] = [0, 1, 2].filter((axis) => axis !== flattest);
  return mesh.vertices.map((v) => [
    (v[ua] - mins[ua]) / extents[ua],
    (v[va] - mins[va]) / extents[va],
  ]);
}
