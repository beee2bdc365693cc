// Client-side goodness-field overlay: bilinear interpolation of the numeric
// grid plus quantized contour bands, so the overlay stays resolution
// independent under zoom.

import type { FieldResponse } from "./types.js";

export const CONTOUR_BANDS = 8;

// theme stops, low to high interest: neutral gray -> purple -> pink
const STOPS: [number, number, number][] = [
  [236, 236, 238],
  [199, 186, 214],
  [158, 122, 186],
  [214, 96, 156],
  [244, 114, 158],
];

/** Bilinear sample of the field at map coordinates; clamps to the bounds. */
export function sampleField(field: FieldResponse, x: number, y: number): number {
  const [nx, ny] = field.resolution;
  const { min, max } = field.bounds;
  const fx = ((x - min[0]) / (max[0] - min[0])) * (nx - 1);
  const fy = ((y - min[1]) / (max[1] - min[1])) * (ny - 1);
  const cx = Math.min(Math.max(fx, 0), nx - 1);
  const cy = Math.min(Math.max(fy, 0), ny - 1);
  const i0 = Math.min(Math.floor(cx), nx - 2);
  const j0 = Math.min(Math.floor(cy), ny - 2);
  const tx = cx - i0;
  const ty = cy - j0;
  const v = field.values;
  return (
    v[i0][j0] * (1 - tx) * (1 - ty) +
    v[i0 + 1][j0] * tx * (1 - ty) +
    v[i0][j0 + 1] * (1 - tx) * ty +
    v[i0 + 1][j0 + 1] * tx * ty
  );
}

/** Normalize a value into [0, 1] over the field's vmin..vmax range. */
export function normalizeValue(field: FieldResponse, value: number): number {
  const span = field.vmax - field.vmin;
  if (span <= 0) return 0;
  return Math.min(Math.max((value - field.vmin) / span, 0), 1);
}

/** Quantize into one of CONTOUR_BANDS discrete bands. */
export function bandIndex(t: number): number {
  return Math.min(Math.floor(t * CONTOUR_BANDS), CONTOUR_BANDS - 1);
}

export function bandColor(band: number): string {
  const t = band / (CONTOUR_BANDS - 1);
  const pos = t * (STOPS.length - 1);
  const i = Math.min(Math.floor(pos), STOPS.length - 2);
  const f = pos - i;
  const mix = (a: number, b: number) => Math.round(a + (b - a) * f);
  const [r, g, b] = [0, 1, 2].map((c) => mix(STOPS[i][c], STOPS[i + 1][c])) as
    [number, number, number];
  return `rgb(${r},${g},${b})`;
}

/** Overlay color at map coordinates, or null where the field is flat zero. */
export function overlayColor(field: FieldResponse, x: number, y: number): string | null {
  if (field.vmax === field.vmin) return null;
  const t = normalizeValue(field, sampleField(field, x, y));
  return bandColor(bandIndex(t));
}
