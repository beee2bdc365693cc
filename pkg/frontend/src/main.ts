// Browser bootstrap: builds the page, binds DOM events, starts a session.

import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { GenerationCard } from "./card.js";
import { InputBox } from "./inputbox.js";
import { MapView } from "./mapview.js";
import type { Surface } from "./surface.js";
import { TreeView } from "./treeview.js";

const API_BASE =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000";

function surfaceOf(canvas: HTMLCanvasElement): Surface {
  return { width: canvas.width, height: canvas.height, ctx: canvas.getContext("2d")! };
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, parent: HTMLElement, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text) node.textContent = text;
  parent.appendChild(node);
  return node;
}

function canvasIn(parent: HTMLElement, w: number, h: number): HTMLCanvasElement {
  const canvas = el("canvas", parent);
  canvas.width = w;
  canvas.height = h;
  return canvas;
}

async function boot() {
  const root = document.getElementById("app")!;
  const left = el("div", root, "column left");
  const right = el("div", root, "column right");

  el("h2", left, undefined, "Exploration Map");
  const mapCanvas = canvasIn(left, 640, 520);
  el("h2", left, undefined, "Prompt");
  const promptRow = el("div", left, "prompt-row");
  const promptInput = el("input", promptRow) as HTMLInputElement;
  promptInput.placeholder = "describe a chair, e.g. a wide armchair";
  const promptButton = el("button", promptRow, undefined, "Generate designs");
  const chipRow = el("div", left, "chips");

  el("h2", right, undefined, "Generation Card");
  const cardCanvas = canvasIn(right, 420, 360);
  const cardControls = el("div", right, "card-controls");
  const blobButton = el("button", cardControls, undefined, "Blobs");
  const meshButton = el("button", cardControls, undefined, "Mesh");
  const generateButton = el("button", cardControls, "accent", "Generate alternatives");
  const childRow = el("div", right, "children");
  el("h2", right, undefined, "Design Versioning Tree");
  const treeCanvas = canvasIn(right, 420, 320);

  const api = new ApiClient(API_BASE);
  const input = new InputBox();
  const views = {
    map: new MapView(surfaceOf(mapCanvas)),
    card: new GenerationCard(surfaceOf(cardCanvas), api),
    tree: new TreeView(surfaceOf(treeCanvas)),
    input,
  };
  const app = new App(api, views);

  app.onBusyChange = (busy) => {
    for (const b of [promptButton, generateButton]) b.disabled = busy;
  };

  input.onChange = () => {
    promptInput.value = input.text;
    chipRow.textContent = "";
    for (const chip of input.chips()) {
      const b = el("button", chipRow, `chip ${chip.kind}`, chip.label);
      b.addEventListener("click", () => input.appendAdjective(chip.label));
    }
  };
  promptInput.addEventListener("input", () => { input.text = promptInput.value; });
  promptButton.addEventListener("click", () => { void app.submitPrompt(); });

  mapCanvas.addEventListener("mousemove", (ev) => {
    const r = mapCanvas.getBoundingClientRect();
    views.map.handleHover(ev.clientX - r.left, ev.clientY - r.top);
  });
  mapCanvas.addEventListener("click", (ev) => {
    const r = mapCanvas.getBoundingClientRect();
    views.map.handleClick(ev.clientX - r.left, ev.clientY - r.top);
  });

  cardCanvas.addEventListener("click", (ev) => {
    const r = cardCanvas.getBoundingClientRect();
    views.card.handleClick(ev.clientX - r.left, ev.clientY - r.top);
  });
  let dragging = false;
  cardCanvas.addEventListener("mousedown", () => { dragging = true; });
  window.addEventListener("mouseup", () => { dragging = false; });
  cardCanvas.addEventListener("mousemove", (ev) => {
    if (dragging) views.card.orbit(ev.movementX * 0.01, ev.movementY * 0.01);
  });
  blobButton.addEventListener("click", () => { void views.card.setMode("blob"); });
  meshButton.addEventListener("click", () => { void views.card.setMode("mesh"); });

  generateButton.addEventListener("click", async () => {
    const children = await app.generate();
    childRow.textContent = "";
    children.forEach((child, i) => {
      const b = el("button", childRow, "child", `pick #${i + 1}`);
      b.addEventListener("click", () => { void app.chooseChild(i); });
    });
  });

  treeCanvas.addEventListener("click", (ev) => {
    const r = treeCanvas.getBoundingClientRect();
    views.tree.handleClick(ev.clientX - r.left, ev.clientY - r.top);
  });

  await app.start();
}

void boot();
