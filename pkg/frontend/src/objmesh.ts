/**
 * Minimal Wavefront OBJ loader: vertices, texture coordinates and faces
 * (triangulated by fanning). Normals and materials are ignored; the bridge
 * only needs geometry for annotation projection.
 */

import * as fs from "fs";

export interface Mesh {
  vertices: number[][];      // [x, y, z]
  uvs: number[][];           // [u, v]
  /** Triangles as vertex-index / uv-index pairs (uv index -1 when absent). */
  triangles: { v: [number, number, number]; t: [number, number, number] }[];
}

export function parseObj(text: string): Mesh {
  const vertices: number[][] = [];
  const uvs: number[][] = [];
  const triangles: Mesh["triangles"] = [];

  for (const rawLine of text.split("\n")) {
    const line = rawLine.trim();
    if (line === "" || line.startsWith("#")) continue;
    const parts = line.split(/\s+/);
    if (parts[0] === "v") {
      vertices.push([Number(parts[1]), Number(parts[2]), Number(parts[3])]);
    } else if (parts[0] === "vt") {
      uvs.push([Number(parts[1]), Number(parts[2])]);
    } else if (parts[0] === "f") {
      const corners = parts.slice(1).map((token) => {
        const [v, t] = token.split("/");
        return {
          v: resolveIndex(Number(v), vertices.length),
          t: t ? resolveIndex(Number(t), uvs.length) : -1,
        };
      });
      for (let i = 1; i + 1 < corners.length; i++) {
        triangles.push({
          v: [corners[0].v, corners[i].v, corners[i + 1].v],
          t: [corners[0].t, corners[i].t, corners[i + 1].t],
        });
      }
    }
  }
  return { vertices, uvs, triangles };
}

function resolveIndex(index: number, count: number): number {
  return index > 0 ? index - 1 : count + index;
}

export function loadObj(path: string): Mesh {
  return parseObj(fs.readFileSync(path, "utf-8"));
}
