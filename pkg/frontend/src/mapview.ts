// Exploration Map: scatter of designs over the goodness-field overlay.
// Point classes are both color- and shape-coded (corpus dot, prompt
// quadrangle, generated triangle) so the map stays readable without color.

import { overlayColor } from "./field.js";
import type { Surface } from "./surface.js";
import type { FieldResponse, MapPoint } from "./types.js";

const CLASS_COLORS = { corpus: "#9aa3ab", prompt: "#3fc1a9", llm: "#e8b32a" } as const;
const OVERLAY_CELLS = 90;
const POINT_RADIUS = 4;
const PICK_RADIUS = 9;

export interface MapViewState {
  points: MapPoint[];
  field: FieldResponse | null;
}

export class MapView {
  state: MapViewState = { points: [], field: null };
  onHover: (point: MapPoint | null) => void = () => {};
  onOpen: (point: MapPoint) => void = () => {};
  overlayPaintCount = 0;

  private bounds: { min: [number, number]; max: [number, number] } | null = null;

  constructor(private surface: Surface) {}

  setPoints(points: MapPoint[]): void {
    this.state.points = points;
    this.bounds = this.computeBounds();
    this.render();
  }

  setField(field: FieldResponse): void {
    this.state.field = field;
    this.render();
  }

  private computeBounds() {
    if (!this.state.points.length) return null;
    const xs = this.state.points.map((p) => p.position[0]);
    const ys = this.state.points.map((p) => p.position[1]);
    const min: [number, number] = [Math.min(...xs), Math.min(...ys)];
    const max: [number, number] = [Math.max(...xs), Math.max(...ys)];
    const pad: [number, number] = [(max[0] - min[0]) * 0.06, (max[1] - min[1]) * 0.06];
    return {
      min: [min[0] - pad[0], min[1] - pad[1]] as [number, number],
      max: [max[0] + pad[0], max[1] + pad[1]] as [number, number],
    };
  }

  toCanvas(pos: [number, number]): [number, number] {
    const b = this.bounds;
    if (!b) return [0, 0];
    const { width, height } = this.surface;
    const x = ((pos[0] - b.min[0]) / (b.max[0] - b.min[0])) * width;
    const y = height - ((pos[1] - b.min[1]) / (b.max[1] - b.min[1])) * height;
    return [x, y];
  }

  toMap(x: number, y: number): [number, number] {
    const b = this.bounds;
    if (!b) return [0, 0];
    const { width, height } = this.surface;
    return [
      b.min[0] + (x / width) * (b.max[0] - b.min[0]),
      b.min[1] + ((height - y) / height) * (b.max[1] - b.min[1]),
    ];
  }

  render(): void {
    const { ctx, width, height } = this.surface;
    ctx.clearRect(0, 0, width, height);
    if (this.state.field && this.bounds) {
      this.paintOverlay(this.state.field);
    }
    for (const point of this.state.points) {
      this.paintPoint(point);
    }
  }

  private paintOverlay(field: FieldResponse): void {
    const { ctx, width, height } = this.surface;
    const cw = width / OVERLAY_CELLS;
    const ch = height / OVERLAY_CELLS;
    for (let i = 0; i < OVERLAY_CELLS; i++) {
      for (let j = 0; j < OVERLAY_CELLS; j++) {
        const [mx, my] = this.toMap((i + 0.5) * cw, (j + 0.5) * ch);
        const color = overlayColor(field, mx, my);
        if (color) {
          ctx.globalAlpha = 0.55;
          ctx.fillStyle = color;
          ctx.fillRect(i * cw, j * ch, cw + 0.5, ch + 0.5);
        }
      }
    }
    ctx.globalAlpha = 1.0;
    this.overlayPaintCount += 1;
  }

  private paintPoint(point: MapPoint): void {
    const { ctx } = this.surface;
    const [x, y] = this.toCanvas(point.position);
    const r = POINT_RADIUS;
    ctx.fillStyle = CLASS_COLORS[point.color_class];
    ctx.beginPath();
    if (point.color_class === "prompt") {
      // quadrangle
      ctx.moveTo(x - r, y - r);
      ctx.lineTo(x + r, y - r);
      ctx.lineTo(x + r, y + r);
      ctx.lineTo(x - r, y + r);
      ctx.closePath();
    } else if (point.color_class === "llm") {
      // triangle
      ctx.moveTo(x, y - r - 1);
      ctx.lineTo(x + r + 1, y + r);
      ctx.lineTo(x - r - 1, y + r);
      ctx.closePath();
    } else {
      ctx.arc(x, y, r - 1, 0, 2 * Math.PI);
    }
    ctx.fill();
  }

  pick(x: number, y: number): MapPoint | null {
    let best: MapPoint | null = null;
    let bestDist = PICK_RADIUS;
    for (const point of this.state.points) {
      const [px, py] = this.toCanvas(point.position);
      const d = Math.hypot(px - x, py - y);
      if (d < bestDist) {
        best = point;
        bestDist = d;
      }
    }
    return best;
  }

  handleHover(x: number, y: number): void {
    this.onHover(this.pick(x, y));
  }

  handleClick(x: number, y: number): void {
    const hit = this.pick(x, y);
    if (hit) this.onOpen(hit);
  }
}
