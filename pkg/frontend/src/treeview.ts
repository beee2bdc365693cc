// Design Versioning Tree: node-link diagram of the lineage, depth running
// down the vertical axis. Nodes re-open their design in the Generation Card.

import type { Surface } from "./surface.js";
import type { TreeResponse } from "./types.js";

const NODE_RADIUS = 9;
const LINK_COLOR = "#8d97a1";
const NODE_COLOR = "#5b87c5";
const ROOT_COLOR = "#3fc1a9";

interface PlacedNode {
  shapeId: string;
  x: number;
  y: number;
  isRoot: boolean;
}

export class TreeView {
  onOpen: (shapeId: string) => void = () => {};
  nodeCount = 0;
  thumbnailMode: "blob" | "mesh" = "blob";

  private placed: PlacedNode[] = [];
  private edges: [string, string][] = [];

  constructor(private surface: Surface) {}

  setTree(tree: TreeResponse): void {
    this.edges = [];
    const roots = new Set(tree.tree.roots.map((r) => r.shape_id));
    const walk = (node: { shape_id: string; children: any[] }) => {
      for (const child of node.children) {
        this.edges.push([node.shape_id, child.shape_id]);
        walk(child);
      }
    };
    tree.tree.roots.forEach(walk);

    if (!tree.layout.length) {
      this.placed = [];
      this.nodeCount = 0;
      this.render();
      return;
    }
    const xs = tree.layout.map((n) => n.position[0]);
    const ys = tree.layout.map((n) => n.position[1]);
    const minX = Math.min(...xs) - 0.5;
    const maxX = Math.max(...xs) + 0.5;
    const minY = Math.min(...ys) - 0.5;
    const maxY = Math.max(...ys) + 0.5;
    const { width, height } = this.surface;
    this.placed = tree.layout.map((n) => ({
      shapeId: n.shape_id,
      x: ((n.position[0] - minX) / (maxX - minX)) * width,
      // depth descends: higher depth (more negative layout y) lower on canvas
      y: ((maxY - n.position[1]) / (maxY - minY)) * height,
      isRoot: roots.has(n.shape_id),
    }));
    this.nodeCount = this.placed.length;
    this.render();
  }

  setThumbnailMode(mode: "blob" | "mesh"): void {
    this.thumbnailMode = mode;
    this.render();
  }

  placedNodes(): ReadonlyArray<{ shapeId: string; x: number; y: number; isRoot: boolean }> {
    return this.placed;
  }

  render(): void {
    const { ctx, width, height } = this.surface;
    ctx.clearRect(0, 0, width, height);
    const byId = new Map(this.placed.map((n) => [n.shapeId, n]));
    ctx.strokeStyle = LINK_COLOR;
    ctx.lineWidth = 1.4;
    for (const [a, b] of this.edges) {
      const na = byId.get(a);
      const nb = byId.get(b);
      if (!na || !nb) continue;
      ctx.beginPath();
      ctx.moveTo(na.x, na.y);
      ctx.lineTo(nb.x, nb.y);
      ctx.stroke();
    }
    for (const node of this.placed) {
      ctx.fillStyle = node.isRoot ? ROOT_COLOR : NODE_COLOR;
      ctx.beginPath();
      if (this.thumbnailMode === "mesh") {
        // square thumbnails hint at the solid mesh mode
        ctx.moveTo(node.x - NODE_RADIUS, node.y - NODE_RADIUS);
        ctx.lineTo(node.x + NODE_RADIUS, node.y - NODE_RADIUS);
        ctx.lineTo(node.x + NODE_RADIUS, node.y + NODE_RADIUS);
        ctx.lineTo(node.x - NODE_RADIUS, node.y + NODE_RADIUS);
        ctx.closePath();
      } else {
        ctx.arc(node.x, node.y, NODE_RADIUS, 0, 2 * Math.PI);
      }
      ctx.fill();
    }
  }

  pick(x: number, y: number): string | null {
    for (const node of this.placed) {
      if (Math.hypot(node.x - x, node.y - y) <= NODE_RADIUS + 3) return node.shapeId;
    }
    return null;
  }

  handleClick(x: number, y: number): void {
    const hit = this.pick(x, y);
    if (hit) this.onOpen(hit);
  }
}
