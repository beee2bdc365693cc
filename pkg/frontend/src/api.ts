// Thin typed client over fetch. The base URL is configurable and the fetch
// implementation injectable (tests stub it; the browser passes nothing).

import type {
  FieldResponse,
  GenerateResponse,
  MapResponse,
  PromptResponse,
  ShapeJson,
  TreeResponse,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(public baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "Content-Type": "application/json" } };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const payload = await resp.json();
        if (payload && typeof payload.detail === "string") detail = payload.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  async createSession(): Promise<string> {
    const out = await this.request<{ session_id: string }>("POST", "/sessions");
    return out.session_id;
  }

  prompt(sessionId: string, text: string): Promise<PromptResponse> {
    return this.request("POST", `/sessions/${sessionId}/prompt`, { text });
  }

  map(sessionId?: string): Promise<MapResponse> {
    const q = sessionId ? `?session=${encodeURIComponent(sessionId)}` : "";
    return this.request("GET", `/map${q}`);
  }

  roiField(sessionId: string): Promise<FieldResponse> {
    return this.request("GET", `/sessions/${sessionId}/roi-field`);
  }

  shapeBlobs(shapeId: string): Promise<ShapeJson> {
    return this.request("GET", `/shapes/${encodeURIComponent(shapeId)}/blobs`);
  }

  async shapeMeshObj(shapeId: string, resolution: number): Promise<string> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/shapes/${encodeURIComponent(shapeId)}/mesh?resolution=${resolution}`,
    );
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return resp.text();
  }

  generate(sessionId: string, shapeId: string, selectedParts: number[],
           seed?: number): Promise<GenerateResponse> {
    const body: Record<string, unknown> = { shape_id: shapeId, selected_parts: selectedParts };
    if (seed !== undefined) body.seed = seed;
    return this.request("POST", `/sessions/${sessionId}/generate`, body);
  }

  choose(sessionId: string, chosen: string, others: string[]): Promise<{ field_version: number }> {
    return this.request("POST", `/sessions/${sessionId}/choose`, {
      chosen_shape_id: chosen,
      other_shape_ids: others,
    });
  }

  tree(sessionId: string): Promise<TreeResponse> {
    return this.request("GET", `/sessions/${sessionId}/tree`);
  }
}
