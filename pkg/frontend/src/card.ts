// Generation Card: 3D view of one design with a blob/mesh toggle,
// click-to-select parts (selection survives mode toggles), and the
// generation round flow (3 ranked children, pick one).

import type { ApiClient } from "./api.js";
import {
  Camera,
  defaultCamera,
  ellipsoidRings,
  faceNormal,
  parseObj,
  project,
  type ParsedMesh,
  type Vec3,
} from "./geometry.js";
import type { Surface } from "./surface.js";
import type { GeneratedChild, ShapeJson } from "./types.js";

export type ViewMode = "blob" | "mesh";

const SELECTED_COLOR = "#ff5a7a";
const BLOB_COLOR = "#5b87c5";
const MESH_BASE = 176;
const PREVIEW_RESOLUTION = 32;
const PICK_RADIUS = 22;

export class GenerationCard {
  shape: ShapeJson | null = null;
  mode: ViewMode = "blob";
  selectedParts = new Set<number>();
  children: GeneratedChild[] = [];
  camera: Camera;
  renderCount = 0;

  private mesh: ParsedMesh | null = null;

  constructor(private surface: Surface, private api: ApiClient) {
    this.camera = defaultCamera(surface.width, surface.height);
  }

  async open(shapeId: string): Promise<void> {
    this.shape = await this.api.shapeBlobs(shapeId);
    this.mesh = null;
    this.selectedParts.clear();
    this.children = [];
    this.render();
  }

  async setMode(mode: ViewMode): Promise<void> {
    if (mode === this.mode) return;
    this.mode = mode;
    if (mode === "mesh" && this.shape && !this.mesh) {
      const text = await this.api.shapeMeshObj(this.shape.id, PREVIEW_RESOLUTION);
      this.mesh = parseObj(text);
    }
    this.render();
  }

  togglePart(index: number): void {
    if (index < 0 || index > 15) return;
    if (this.selectedParts.has(index)) this.selectedParts.delete(index);
    else this.selectedParts.add(index);
    this.render();
  }

  selectGroup(indices: number[]): void {
    for (const i of indices) this.selectedParts.add(i);
    this.render();
  }

  /** Part whose projected blob center is nearest the canvas point; used for
   * picking in both modes (the blob parameters exist in mesh mode too). */
  pickPart(x: number, y: number): number | null {
    if (!this.shape) return null;
    let best: number | null = null;
    let bestDist = PICK_RADIUS;
    this.shape.parts.forEach((part, i) => {
      if (part.weight <= 0) return;
      const p = project(part.center as Vec3, this.camera);
      const d = Math.hypot(p.x - x, p.y - y);
      if (d < bestDist) {
        best = i;
        bestDist = d;
      }
    });
    return best;
  }

  handleClick(x: number, y: number): void {
    const part = this.pickPart(x, y);
    if (part !== null) this.togglePart(part);
  }

  orbit(dYaw: number, dPitch: number): void {
    this.camera.yaw += dYaw;
    this.camera.pitch = Math.min(Math.max(this.camera.pitch + dPitch, -1.4), 1.4);
    this.render();
  }

  render(): void {
    const { ctx, width, height } = this.surface;
    ctx.clearRect(0, 0, width, height);
    if (!this.shape) return;
    if (this.mode === "blob") this.renderBlobs();
    else this.renderMesh();
    this.renderCount += 1;
  }

  private renderBlobs(): void {
    const { ctx } = this.surface;
    const parts = this.shape!.parts
      .map((part, i) => ({ part, i }))
      .filter(({ part }) => part.weight > 0)
      .sort((a, b) => project(a.part.center as Vec3, this.camera).depth
        - project(b.part.center as Vec3, this.camera).depth);
    for (const { part, i } of parts) {
      const selected = this.selectedParts.has(i);
      ctx.strokeStyle = selected ? SELECTED_COLOR : BLOB_COLOR;
      ctx.lineWidth = selected ? 2.2 : 1.2;
      ctx.globalAlpha = 0.4 + 0.6 * Math.min(part.weight, 1);
      for (const ring of ellipsoidRings(part)) {
        ctx.beginPath();
        ring.forEach((p, s) => {
          const q = project(p, this.camera);
          if (s === 0) ctx.moveTo(q.x, q.y);
          else ctx.lineTo(q.x, q.y);
        });
        ctx.closePath();
        ctx.stroke();
      }
    }
    ctx.globalAlpha = 1.0;
  }

  private renderMesh(): void {
    if (!this.mesh) return;
    const { ctx } = this.surface;
    const projected = this.mesh.vertices.map((v) => project(v, this.camera));
    const order = this.mesh.faces
      .map((face, i) => ({
        face,
        i,
        depth: (projected[face[0]].depth + projected[face[1]].depth + projected[face[2]].depth) / 3,
      }))
      .sort((a, b) => b.depth - a.depth); // back to front
    const selectedCenters = [...this.selectedParts]
      .map((i) => this.shape!.parts[i])
      .filter((p) => p.weight > 0)
      .map((p) => p.center as Vec3);
    for (const { face } of order) {
      const n = faceNormal(this.mesh, face);
      const shade = Math.round(MESH_BASE * (0.55 + 0.45 * Math.abs(n[2])));
      const a = this.mesh.vertices[face[0]];
      const nearSelected = selectedCenters.some(
        (c) => Math.hypot(a[0] - c[0], a[1] - c[1], a[2] - c[2]) < 0.3);
      ctx.fillStyle = nearSelected
        ? SELECTED_COLOR
        : `rgb(${shade},${shade + 6},${shade + 14})`;
      ctx.beginPath();
      const p0 = projected[face[0]];
      const p1 = projected[face[1]];
      const p2 = projected[face[2]];
      ctx.moveTo(p0.x, p0.y);
      ctx.lineTo(p1.x, p1.y);
      ctx.lineTo(p2.x, p2.y);
      ctx.closePath();
      ctx.fill();
    }
  }
}
