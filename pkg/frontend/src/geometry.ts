// Minimal 3D math for the blob/mesh views: orbit camera projection,
// iso-scaled ellipsoid outlines from the eigendecomposition, OBJ parsing.

import type { PartJson } from "./types.js";

export type Vec3 = [number, number, number];

// radius multiplier so the ellipsoid matches the iso-0.125 occupancy surface
// of a unit-weight blob: r = sqrt(-2 ln 0.125) per unit sqrt(eigenvalue)
export const ISO_RADIUS_SCALE = Math.sqrt(-2 * Math.log(0.125));

export interface Camera {
  yaw: number; // radians about the vertical axis
  pitch: number; // radians about the lateral axis
  zoom: number; // pixels per model unit
  cx: number; // canvas center x
  cy: number; // canvas center y
}

export function defaultCamera(width: number, height: number): Camera {
  return { yaw: 0.6, pitch: 0.35, zoom: Math.min(width, height) / 2.6, cx: width / 2, cy: height / 2 };
}

/** Rotate into view space: yaw about z (vertical), then pitch about x. */
export function viewTransform(p: Vec3, cam: Camera): Vec3 {
  const [x, y, z] = p;
  const cy = Math.cos(cam.yaw), sy = Math.sin(cam.yaw);
  const x1 = cy * x + sy * y;
  const y1 = -sy * x + cy * y;
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  const y2 = cp * y1 - sp * z;
  const z2 = sp * y1 + cp * z;
  return [x1, y2, z2];
}

/** Orthographic projection to canvas pixels; returns depth for sorting. */
export function project(p: Vec3, cam: Camera): { x: number; y: number; depth: number } {
  const [vx, vy, vz] = viewTransform(p, cam);
  return { x: cam.cx + vx * cam.zoom, y: cam.cy - vz * cam.zoom, depth: vy };
}

function matVec(cols: Vec3[], v: Vec3): Vec3 {
  // cols are the matrix columns
  return [
    cols[0][0] * v[0] + cols[1][0] * v[1] + cols[2][0] * v[2],
    cols[0][1] * v[0] + cols[1][1] * v[1] + cols[2][1] * v[2],
    cols[0][2] * v[0] + cols[1][2] * v[1] + cols[2][2] * v[2],
  ];
}

/**
 * Three principal outline rings of one blob's iso-surface ellipsoid, each a
 * closed polyline in model space. Ring k lies in the plane spanned by the
 * two principal axes other than k.
 */
export function ellipsoidRings(part: PartJson, segments = 24): Vec3[][] {
  const radii = part.eigenvalues.map((l) => ISO_RADIUS_SCALE * Math.sqrt(l)) as Vec3;
  const rings: Vec3[][] = [];
  for (let k = 0; k < 3; k++) {
    const a = (k + 1) % 3;
    const b = (k + 2) % 3;
    const ring: Vec3[] = [];
    for (let s = 0; s < segments; s++) {
      const t = (2 * Math.PI * s) / segments;
      const local: Vec3 = [0, 0, 0];
      local[a] = radii[a] * Math.cos(t);
      local[b] = radii[b] * Math.sin(t);
      const world = matVec(part.eigenvectors as Vec3[], local);
      ring.push([
        part.center[0] + world[0],
        part.center[1] + world[1],
        part.center[2] + world[2],
      ]);
    }
    rings.push(ring);
  }
  return rings;
}

export interface ParsedMesh {
  vertices: Vec3[];
  faces: [number, number, number][];
}

/** Parse the service's Wavefront OBJ text (v and f lines, 1-based indices). */
export function parseObj(text: string): ParsedMesh {
  const vertices: Vec3[] = [];
  const faces: [number, number, number][] = [];
  for (const line of text.split("\n")) {
    const fields = line.trim().split(/\s+/);
    if (fields[0] === "v") {
      vertices.push([Number(fields[1]), Number(fields[2]), Number(fields[3])]);
    } else if (fields[0] === "f") {
      faces.push([
        Number(fields[1].split("/")[0]) - 1,
        Number(fields[2].split("/")[0]) - 1,
        Number(fields[3].split("/")[0]) - 1,
      ]);
    }
  }
  return { vertices, faces };
}

export function faceNormal(mesh: ParsedMesh, face: [number, number, number]): Vec3 {
  const [a, b, c] = face.map((i) => mesh.vertices[i]);
  const u: Vec3 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
  const v: Vec3 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
  const n: Vec3 = [
    u[1] * v[2] - u[2] * v[1],
    u[2] * v[0] - u[0] * v[2],
    u[0] * v[1] - u[1] * v[0],
  ];
  const len = Math.hypot(...n) || 1;
  return [n[0] / len, n[1] / len, n[2] / len];
}
