import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { GenerationCard } from "../src/card.js";
import { InputBox } from "../src/inputbox.js";
import { MapView } from "../src/mapview.js";
import { TreeView } from "../src/treeview.js";
import type { ShapeJson } from "../src/types.js";
import { cannedFetch, makeSurface } from "./stubs.js";

const IDENT: [number, number, number][] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

function fakeShape(id: string): ShapeJson {
  return {
    id, provenance: "corpus", parent_id: null, label: null,
    parts: Array.from({ length: 16 }, (_, i) => ({
      center: [i * 0.05 - 0.4, 0, 0] as [number, number, number],
      eigenvalues: [0.01, 0.01, 0.01] as [number, number, number],
      eigenvectors: IDENT,
      weight: 1,
    })),
  };
}

function makeApp() {
  let fieldVersion = 0;
  const children = ["k0", "k1", "k2"];
  const { impl, seen } = cannedFetch({
    "POST /sessions/s1/prompt": () => ({
      designs: [{ shape_id: "p0", position: [0, 0], color_class: "prompt" }],
      suggestions: { aligned: ["open", "wide", "thin"],
                     diversified: ["fluid", "faceted", "organic"] },
    }),
    "POST /sessions/s1/generate": () => ({
      children: children.map((c, i) => ({ shape_id: c, position: [i, i], rank: i })),
      tree: { roots: [] },
    }),
    "POST /sessions/s1/choose": () => {
      fieldVersion += 1;
      return { field_version: fieldVersion };
    },
    "POST /sessions": () => ({ session_id: "s1" }),
    "GET /roi-field": () => ({
      bounds: { min: [-1, -1], max: [1, 1] }, resolution: [3, 3],
      values: [[0, 0, 0], [0, fieldVersion, 0], [0, 0, 0]],
      vmin: 0, vmax: fieldVersion, version: fieldVersion,
    }),
    "GET /map": () => ({
      points: [{ shape_id: "p0", position: [0, 0], color_class: "corpus" }],
      clusters: [0],
    }),
    "GET /blobs": (url) => fakeShape(decodeURIComponent(url.split("/shapes/")[1].split("/")[0])),
    "GET /tree": () => ({
      tree: { roots: [{ shape_id: "p0", edit: null, children: [] }] },
      layout: [{ shape_id: "p0", position: [0, 0, 0] }],
    }),
    "GET /mesh": () => "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n",
  });
  const api = new ApiClient("http://test", impl);
  const views = {
    map: new MapView(makeSurface()),
    card: new GenerationCard(makeSurface(), api),
    tree: new TreeView(makeSurface()),
    input: new InputBox(),
  };
  return { app: new App(api, views), views, seen };
}

describe("App", () => {
  it("starts a session and loads map plus zero field", async () => {
    const { app, views } = makeApp();
    await app.start();
    expect(app.sessionId).toBe("s1");
    expect(views.map.state.points).toHaveLength(1);
    expect(app.fieldVersion).toBe(0);
  });

  it("prompt updates suggestion chips", async () => {
    const { app, views } = makeApp();
    await app.start();
    views.input.setText("armchair");
    const designs = await app.submitPrompt();
    expect(designs[0].shape_id).toBe("p0");
    expect(views.input.chips()).toHaveLength(6);
  });

  it("generate requires an open design with selected parts", async () => {
    const { app, views } = makeApp();
    await app.start();
    await expect(app.generate()).rejects.toThrow("open a design");
    await app.openDesign("p0");
    await expect(app.generate()).rejects.toThrow("select at least one part");
    views.card.togglePart(2);
    const kids = await app.generate();
    expect(kids.map((k) => k.shape_id)).toEqual(["k0", "k1", "k2"]);
  });

  it("choose posts chosen vs others (incl. parent) and refreshes the field", async () => {
    const { app, views, seen } = makeApp();
    await app.start();
    await app.openDesign("p0");
    views.card.togglePart(1);
    await app.generate();
    await app.chooseChild(1);
    const choose = seen.find((r) => r.url.includes("/choose"));
    expect(choose?.body).toEqual({
      chosen_shape_id: "k1",
      other_shape_ids: ["k0", "k2", "p0"],
    });
    expect(app.fieldVersion).toBe(1);
    // the chosen child is reopened in the card
    expect(views.card.shape?.id).toBe("k1");
  });

  it("rejects overlapping mutating requests", async () => {
    const { app, views } = makeApp();
    await app.start();
    views.input.setText("chair");
    const first = app.submitPrompt();
    await expect(app.submitPrompt()).rejects.toThrow("in flight");
    await first;
    const busyStates: boolean[] = [];
    app.onBusyChange = (b) => busyStates.push(b);
    await app.submitPrompt();
    expect(busyStates).toEqual([true, false]);
  });

  it("map hover fetches a blob preview", async () => {
    const { app, views } = makeApp();
    await app.start();
    await app.hoverBlob(views.map.state.points[0]);
    expect(app.hoverPreview?.id).toBe("p0");
    await app.hoverBlob(null);
    expect(app.hoverPreview).toBeNull();
  });
});
