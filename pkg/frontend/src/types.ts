// Wire types mirroring the service JSON API.

export type ColorClass = "corpus" | "prompt" | "llm";

export interface MapPoint {
  shape_id: string;
  position: [number, number];
  color_class: ColorClass;
}

export interface MapResponse {
  points: MapPoint[];
  clusters: number[];
}

export interface Suggestions {
  aligned: string[];
  diversified: string[];
}

export interface PromptResponse {
  designs: MapPoint[];
  suggestions: Suggestions;
}

export interface FieldResponse {
  bounds: { min: [number, number]; max: [number, number] };
  resolution: [number, number];
  values: number[][];
  vmin: number;
  vmax: number;
  version: number;
}

export interface PartJson {
  center: [number, number, number];
  eigenvalues: [number, number, number];
  eigenvectors: [number, number, number][]; // columns
  weight: number;
}

export interface ShapeJson {
  id: string;
  provenance: string;
  parent_id: string | null;
  label: string | null;
  parts: PartJson[];
}

export interface GeneratedChild {
  shape_id: string;
  position: [number, number];
  rank: number;
}

export interface GenerateResponse {
  children: GeneratedChild[];
  tree: TreeJson;
}

export interface TreeNodeJson {
  shape_id: string;
  edit: {
    selected_parts: number[];
    adjectives: string[];
    generation_round: number;
  } | null;
  children: TreeNodeJson[];
}

export interface TreeJson {
  roots: TreeNodeJson[];
}

export interface TreeLayoutNode {
  shape_id: string;
  position: [number, number, number];
}

export interface TreeResponse {
  tree: TreeJson;
  layout: TreeLayoutNode[];
}
