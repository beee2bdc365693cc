// Session controller: wires the four views to the service API. All state
// shown anywhere originates from API responses; the only mutations are the
// documented POST endpoints, and at most one mutating request is in flight
// at a time (callers disable their buttons off the `busy` flag).

import { ApiClient } from "./api.js";
import { GenerationCard } from "./card.js";
import { InputBox } from "./inputbox.js";
import { MapView } from "./mapview.js";
import { TreeView } from "./treeview.js";
import type { GeneratedChild, MapPoint, ShapeJson } from "./types.js";

export interface AppSurfaces {
  map: MapView;
  card: GenerationCard;
  tree: TreeView;
  input: InputBox;
}

export class App {
  sessionId: string | null = null;
  busy = false;
  lastRound: { parent: string; children: GeneratedChild[] } | null = null;
  fieldVersion = -1;
  onBusyChange: (busy: boolean) => void = () => {};
  hoverPreview: ShapeJson | null = null;

  constructor(public api: ApiClient, public views: AppSurfaces) {
    views.map.onOpen = (point) => { void this.openDesign(point.shape_id); };
    views.map.onHover = (point) => { void this.hoverBlob(point); };
    views.tree.onOpen = (shapeId) => { void this.openDesign(shapeId); };
  }

  private async mutate<T>(fn: () => Promise<T>): Promise<T> {
    if (this.busy) throw new Error("another request is in flight");
    this.busy = true;
    this.onBusyChange(true);
    try {
      return await fn();
    } finally {
      this.busy = false;
      this.onBusyChange(false);
    }
  }

  async start(): Promise<void> {
    this.sessionId = await this.mutate(() => this.api.createSession());
    await this.refreshMap();
    await this.refreshField();
  }

  private sid(): string {
    if (!this.sessionId) throw new Error("session not started");
    return this.sessionId;
  }

  async refreshMap(): Promise<void> {
    const map = await this.api.map(this.sid());
    this.views.map.setPoints(map.points);
  }

  async refreshField(): Promise<void> {
    const field = await this.api.roiField(this.sid());
    this.fieldVersion = field.version;
    this.views.map.setField(field);
  }

  async refreshTree(): Promise<void> {
    const tree = await this.api.tree(this.sid());
    this.views.tree.setTree(tree);
  }

  async submitPrompt(): Promise<MapPoint[]> {
    const text = this.views.input.text;
    const result = await this.mutate(() => this.api.prompt(this.sid(), text));
    this.views.input.setSuggestions(result.suggestions);
    await this.refreshMap();
    return result.designs;
  }

  async openDesign(shapeId: string): Promise<void> {
    await this.views.card.open(shapeId);
  }

  async hoverBlob(point: MapPoint | null): Promise<void> {
    this.hoverPreview = point ? await this.api.shapeBlobs(point.shape_id) : null;
  }

  async generate(seed?: number): Promise<GeneratedChild[]> {
    const card = this.views.card;
    if (!card.shape) throw new Error("open a design first");
    if (!card.selectedParts.size) throw new Error("select at least one part");
    const parent = card.shape.id;
    const result = await this.mutate(() =>
      this.api.generate(this.sid(), parent, [...card.selectedParts].sort((a, b) => a - b), seed));
    card.children = result.children;
    this.lastRound = { parent, children: result.children };
    await this.refreshTree();
    await this.refreshMap();
    return result.children;
  }

  /** Pick one child of the last round; the others plus the parent become the
   * non-chosen options, and the overlay refreshes from the refit field. */
  async chooseChild(index: number): Promise<void> {
    const round = this.lastRound;
    if (!round) throw new Error("no generation round to choose from");
    const chosen = round.children[index].shape_id;
    const others = round.children
      .filter((_, i) => i !== index)
      .map((c) => c.shape_id)
      .concat([round.parent]);
    await this.mutate(() => this.api.choose(this.sid(), chosen, others));
    await this.refreshField();
    await this.openDesign(chosen);
  }
}
