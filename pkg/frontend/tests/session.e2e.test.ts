// Scripted session against a live seeded server: prompt "armchair", open a
// result, select the back group, generate, choose a child, run a second
// round. Asserts the map overlay refreshes, the tree renders 7 nodes, and
// part selection survives the blob/mesh toggle.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { GenerationCard } from "../src/card.js";
import { InputBox } from "../src/inputbox.js";
import { MapView } from "../src/mapview.js";
import { TreeView } from "../src/treeview.js";
import { makeSurface } from "./stubs.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;
const PYTHON = process.env.CHAIRSPACE_PYTHON ?? "python3";

let server: ChildProcess | null = null;

async function serverReady(timeoutMs = 90_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${BASE}/map`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 500));
  }
  throw new Error("server did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "chairspace-ui-"));
  const corpus = join(dir, "corpus.jsonl");
  const model = join(dir, "map.npz");
  const config = join(dir, "config.json");
  const gen = spawnSync(PYTHON, ["-m", "chairspace.cli", "gen-corpus", "--size", "300",
                                 "--seed", "11", "--out", corpus]);
  if (gen.status !== 0) throw new Error(`gen-corpus failed: ${gen.stderr}`);
  const fit = spawnSync(PYTHON, ["-m", "chairspace.cli", "fit-embedding", "--corpus", corpus,
                                 "--out", model, "--n-neighbors", "30", "--n-epochs", "100"]);
  if (fit.status !== 0) throw new Error(`fit-embedding failed: ${fit.stderr}`);
  writeFileSync(config, JSON.stringify({
    corpus_path: corpus,
    embedding_path: model,
    port: PORT,
    field_resolution: [50, 50],
    map_clusters: 6,
  }));
  server = spawn(PYTHON, ["-m", "chairspace.cli", "serve", "--config", config],
                 { stdio: "ignore" });
  await serverReady();
}, 120_000);

afterAll(() => {
  server?.kill();
});

describe("scripted session against the live service", () => {
  it("drives the full loop through the UI controllers", async () => {
    const api = new ApiClient(BASE);
    const mapSurface = makeSurface(600, 500);
    const views = {
      map: new MapView(mapSurface),
      card: new GenerationCard(makeSurface(420, 360), api),
      tree: new TreeView(makeSurface(420, 320)),
      input: new InputBox(),
    };
    const app = new App(api, views);
    await app.start();
    expect(views.map.state.points.length).toBe(300);
    const overlayBefore = views.map.overlayPaintCount;

    // prompt "armchair" -> five prompt-class designs on the map
    views.input.setText("armchair");
    const designs = await app.submitPrompt();
    expect(designs).toHaveLength(5);
    expect(views.input.chips()).toHaveLength(6);
    const promptPoints = views.map.state.points.filter((p) => p.color_class === "prompt");
    expect(promptPoints.length).toBe(5);

    // open a result and select the back group
    await app.openDesign(designs[0].shape_id);
    views.card.selectGroup([8, 9, 10, 11]);
    expect(views.card.selectedParts.size).toBe(4);

    // selection persists across blob/mesh toggle
    await views.card.setMode("mesh");
    expect([...views.card.selectedParts].sort((a, b) => a - b)).toEqual([8, 9, 10, 11]);
    await views.card.setMode("blob");
    expect([...views.card.selectedParts].sort((a, b) => a - b)).toEqual([8, 9, 10, 11]);

    // generation round: three ranked children appear on the map as llm-class
    const children = await app.generate(101);
    expect(children).toHaveLength(3);
    expect(views.map.state.points.filter((p) => p.color_class === "llm")).toHaveLength(3);
    expect(views.tree.nodeCount).toBe(4);

    // choose child 1 -> field refit -> overlay refresh
    await app.chooseChild(0);
    expect(app.fieldVersion).toBe(1);
    expect(views.map.overlayPaintCount).toBeGreaterThan(overlayBefore);
    const field = views.map.state.field!;
    expect(field.vmax).toBeGreaterThan(field.vmin);

    // the chosen child is now open; second round on it -> 7-node tree
    expect(views.card.shape?.id).toBe(children[0].shape_id);
    views.card.selectGroup([4, 5, 6, 7]);
    await app.generate(102);
    expect(views.tree.nodeCount).toBe(7);

    // hover preview comes from the blobs endpoint
    await app.hoverBlob(views.map.state.points[0]);
    expect(app.hoverPreview?.parts).toHaveLength(16);
  }, 110_000);
});
