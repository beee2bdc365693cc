"""HTTP API and session orchestration.

The corpus and its 2D map are loaded once at startup and shared read-only
by all sessions.  Each session is event-sourced: every mutating request
appends one event (prompt / generate / choose) with all nondeterminism
resolved into the event (seeds), so replaying an exported log reproduces
the session bit-for-bit -- the replay property doubles as the correctness
oracle for the whole pipeline.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import blobshape as bs
from . import embedding as em
from . import generation as gen
from . import roi
from . import versioning as vt


@dataclass
class ServiceConfig:
    corpus_path: Optional[str] = None
    embedding_path: Optional[str] = None
    provider_endpoint: Optional[str] = None
    provider_api_key: Optional[str] = None
    provider_timeout: float = 20.0
    host: str = "127.0.0.1"
    port: int = 8000
    field_resolution: tuple[int, int] = (100, 100)
    mesh_resolution: int = bs.DEFAULT_MESH_RESOLUTION
    preview_resolution: int = bs.PREVIEW_MESH_RESOLUTION
    map_clusters: int = 8
    # evenly distributed subset shown on the map when the corpus is larger
    map_representatives: int = 1981
    sessions_dir: Optional[str] = None
    kernel_signal_variance: float = 1.0
    kernel_length_scale_frac: float = 0.15
    kernel_jitter: float = 1e-6
    cors_origins: tuple[str, ...] = ("*",)

    @classmethod
    def from_file(cls, path: str) -> "ServiceConfig":
        with open(path) as fh:
            raw = json.load(fh)
        cfg = cls(**{k: v for k, v in raw.items() if k in cls.__dataclass_fields__})
        for k in ("field_resolution", "cors_origins"):
            if isinstance(getattr(cfg, k), list):
                setattr(cfg, k, tuple(getattr(cfg, k)))
        return cfg


class SessionState:
    def __init__(self, session_id: str):
        self.id = session_id
        self.prompt_history: list[str] = []
        self.goodness: Optional[roi.GoodnessModel] = None
        self.tree = vt.VersionTree()
        self.dynamic_shapes: dict[str, bs.Shape] = {}
        self.dynamic_positions: dict[str, tuple[float, float]] = {}
        self.prompt_design_ids: list[str] = []
        self.chosen_ids: list[str] = []
        self.event_log: list[dict] = []
        self.field_version = 0
        self.rounds = 0
        self.lock = threading.Lock()


class AppState:
    """Shared immutable corpus/map plus the live session table."""

    def __init__(self, config: ServiceConfig, corpus: list[bs.Shape],
                 model: em.EmbeddingModel,
                 provider: Callable[[gen.GenerationRequest], gen.GenerationResponse]):
        self.config = config
        self.corpus = corpus
        self.shape_rows = {s.id: i for i, s in enumerate(corpus)}
        self.model = model
        self.cluster_labels = em.cluster_map(model.positions, config.map_clusters,
                                             seed=model.params.seed)
        self.provider = provider
        self.kernel = roi.KernelParams.for_map_diameter(
            model.diameter,
            signal_variance=config.kernel_signal_variance,
            noise_jitter=config.kernel_jitter,
        ) if config.kernel_length_scale_frac == 0.15 else roi.KernelParams(
            signal_variance=config.kernel_signal_variance,
            length_scale=config.kernel_length_scale_frac * model.diameter,
            noise_jitter=config.kernel_jitter,
        )
        lo, hi = model.bounds()
        pad = 0.05 * (hi - lo)
        self.field_min = lo - pad
        self.field_max = hi + pad
        if len(corpus) > config.map_representatives:
            picked = em.select_representatives(model.training_vectors,
                                               config.map_representatives,
                                               seed=model.params.seed)
            self.display_rows = sorted(picked)
        else:
            self.display_rows = list(range(len(corpus)))
        self.sessions: dict[str, SessionState] = {}
        self.sessions_lock = threading.Lock()

    # -- lookup helpers ------------------------------------------------

    def find_shape(self, shape_id: str, session: Optional[SessionState] = None) -> Optional[bs.Shape]:
        row = self.shape_rows.get(shape_id)
        if row is not None:
            return self.corpus[row]
        if session is not None and shape_id in session.dynamic_shapes:
            return session.dynamic_shapes[shape_id]
        for s in self.sessions.values():
            if shape_id in s.dynamic_shapes:
                return s.dynamic_shapes[shape_id]
        return None

    def position_of(self, shape_id: str, session: Optional[SessionState]) -> Optional[np.ndarray]:
        row = self.shape_rows.get(shape_id)
        if row is not None:
            return self.model.positions[row]
        if session is not None and shape_id in session.dynamic_positions:
            return np.asarray(session.dynamic_positions[shape_id])
        return None

    def session(self, session_id: str) -> SessionState:
        s = self.sessions.get(session_id)
        if s is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return s

    def persist_event(self, session: SessionState, event: dict) -> None:
        if self.config.sessions_dir:
            path = Path(self.config.sessions_dir) / f"{session.id}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a") as fh:
                fh.write(json.dumps(event) + "\n")


# ---------------------------------------------------------------------------
# event application (shared by live endpoints and log replay)


def apply_prompt(app: AppState, session: SessionState, text: str, seed: int) -> dict:
    designs = gen.prompt_to_designs(text, app.corpus, app.model.positions,
                                    count=5, seed=seed,
                                    cluster_labels=app.cluster_labels)
    session.prompt_history.append(text)
    points = []
    for s in designs:
        if s.id not in session.prompt_design_ids:
            session.prompt_design_ids.append(s.id)
        pos = app.position_of(s.id, session)
        points.append({"shape_id": s.id, "position": [float(pos[0]), float(pos[1])],
                       "color_class": "prompt"})
    roi_shapes = [app.find_shape(cid, session) for cid in session.chosen_ids]
    sug = gen.suggest_adjectives(session.prompt_history, [s for s in roi_shapes if s])
    event = {"seq": len(session.event_log), "type": "prompt", "text": text, "seed": seed}
    session.event_log.append(event)
    app.persist_event(session, event)
    return {"designs": points,
            "suggestions": {"aligned": list(sug.aligned), "diversified": list(sug.diversified)}}


def apply_generate(app: AppState, session: SessionState, shape_id: str,
                   selected_parts: list[int], seed: int) -> dict:
    parent = app.find_shape(shape_id, session)
    if parent is None:
        raise HTTPException(status_code=404, detail=f"unknown shape {shape_id!r}")
    if not selected_parts:
        raise HTTPException(status_code=400, detail="selected_parts must not be empty")
    if any(not (0 <= int(i) < bs.N_PARTS) for i in selected_parts):
        raise HTTPException(status_code=400, detail="part index out of range")

    roi_shapes = [s for s in (app.find_shape(cid, session) for cid in session.chosen_ids) if s]
    adjectives = gen.extraction_adjectives(session.prompt_history, roi_shapes)
    children = gen.generate_alternatives(
        session.prompt_history, roi_shapes, parent, selected_parts,
        app.provider, seed=seed, adjectives=adjectives)

    placed = []
    for child, attribution in children:
        pos = em.transform(app.model, bs.flatten(child))
        session.dynamic_shapes[child.id] = child
        session.dynamic_positions[child.id] = (float(pos[0]), float(pos[1]))
        placed.append((child.id, (float(pos[0]), float(pos[1]))))

    ranked = roi.rank_candidates(session.goodness, placed)
    session.rounds += 1
    edit = vt.EditDescriptor(selected_parts=tuple(int(i) for i in selected_parts),
                             adjectives=adjectives, generation_round=session.rounds)
    try:
        if not session.tree.has(parent.id):
            vt.add_root(session.tree, parent.id)
        vt.add_generation(session.tree, parent.id, [r.id for r in ranked], edit)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))

    event = {"seq": len(session.event_log), "type": "generate", "shape_id": shape_id,
             "selected_parts": [int(i) for i in selected_parts], "seed": seed}
    session.event_log.append(event)
    app.persist_event(session, event)
    return {
        "children": [
            {"shape_id": r.id, "position": [r.position[0], r.position[1]], "rank": i}
            for i, r in enumerate(ranked)
        ],
        "tree": vt.serialize(session.tree),
    }


def apply_choose(app: AppState, session: SessionState, chosen: str, others: list[str]) -> dict:
    if not others:
        raise HTTPException(status_code=400, detail="other_shape_ids must not be empty")
    if chosen in others:
        raise HTTPException(status_code=400, detail="chosen id must not appear among others")
    positions = {}
    for sid in [chosen] + list(others):
        pos = app.position_of(sid, session)
        if pos is None:
            raise HTTPException(status_code=404, detail=f"unknown shape {sid!r}")
        positions[sid] = (float(pos[0]), float(pos[1]))
    try:
        session.goodness = roi.record_choice(session.goodness, chosen, others,
                                             positions, kernel=app.kernel)
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    session.field_version += 1
    session.chosen_ids.append(chosen)
    event = {"seq": len(session.event_log), "type": "choose", "chosen": chosen,
             "others": list(others)}
    session.event_log.append(event)
    app.persist_event(session, event)
    return {"field_version": session.field_version}


_EVENT_APPLIERS = {"prompt", "generate", "choose"}


def replay_event(app: AppState, session: SessionState, event: dict) -> None:
    etype = event.get("type")
    if etype == "prompt":
        apply_prompt(app, session, event["text"], int(event["seed"]))
    elif etype == "generate":
        apply_generate(app, session, event["shape_id"],
                       list(event["selected_parts"]), int(event["seed"]))
    elif etype == "choose":
        apply_choose(app, session, event["chosen"], list(event["others"]))
    else:
        raise ValueError(f"unknown event type {etype!r}")


# ---------------------------------------------------------------------------
# response schemas


class SessionOut(BaseModel):
    session_id: str


class PointOut(BaseModel):
    shape_id: str
    position: list[float]
    color_class: str


class SuggestionsOut(BaseModel):
    aligned: list[str]
    diversified: list[str]


class PromptIn(BaseModel):
    text: str
    seed: Optional[int] = None


class PromptOut(BaseModel):
    designs: list[PointOut]
    suggestions: SuggestionsOut


class MapOut(BaseModel):
    points: list[PointOut]
    clusters: list[int]


class BoundsOut(BaseModel):
    min: list[float]
    max: list[float]


class FieldOut(BaseModel):
    bounds: BoundsOut
    resolution: list[int]
    values: list[list[float]]
    vmin: float
    vmax: float
    version: int


class PartOut(BaseModel):
    center: list[float]
    eigenvalues: list[float]
    eigenvectors: list[list[float]]
    weight: float


class ShapeOut(BaseModel):
    id: str
    provenance: str
    parent_id: Optional[str]
    label: Optional[str]
    parts: list[PartOut]


class GenerateIn(BaseModel):
    shape_id: str
    selected_parts: list[int]
    seed: Optional[int] = None


class ChildOut(BaseModel):
    shape_id: str
    position: list[float]
    rank: int


class GenerateOut(BaseModel):
    children: list[ChildOut]
    tree: dict


class ChooseIn(BaseModel):
    chosen_shape_id: str
    other_shape_ids: list[str]


class ChooseOut(BaseModel):
    field_version: int


class LayoutNodeOut(BaseModel):
    shape_id: str
    position: list[float]


class TreeOut(BaseModel):
    tree: dict
    layout: list[LayoutNodeOut]


class ImportIn(BaseModel):
    log: str


# ---------------------------------------------------------------------------
# app factory


def build_state(config: Optional[ServiceConfig] = None, *,
                corpus: Optional[list[bs.Shape]] = None,
                model: Optional[em.EmbeddingModel] = None,
                provider: Optional[Callable] = None) -> AppState:
    config = config or ServiceConfig()
    if corpus is None:
        if not config.corpus_path:
            raise ValueError("a corpus (or corpus_path) is required")
        corpus = bs.load_corpus(config.corpus_path)
    if model is None:
        vectors = np.array([bs.flatten(s) for s in corpus])
        if config.embedding_path:
            model = em.load_model(config.embedding_path, vectors)
        else:
            model = em.fit_embedding(vectors, em.EmbeddingParams())
    if provider is None:
        if config.provider_endpoint:
            provider = gen.RemoteProvider(gen.ProviderConfig(
                endpoint_url=config.provider_endpoint,
                api_key=config.provider_api_key,
                timeout=config.provider_timeout))
        else:
            provider = gen.mock_provider
    return AppState(config, corpus, model, provider)


def create_app(config: Optional[ServiceConfig] = None, *,
               corpus: Optional[list[bs.Shape]] = None,
               model: Optional[em.EmbeddingModel] = None,
               provider: Optional[Callable] = None) -> FastAPI:
    state = build_state(config, corpus=corpus, model=model, provider=provider)
    app = FastAPI(title="chairspace", version="0.1.0")
    app.state.engine = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(state.config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/sessions", response_model=SessionOut)
    def create_session():
        session = SessionState(uuid.uuid4().hex[:12])
        with state.sessions_lock:
            state.sessions[session.id] = session
        return {"session_id": session.id}

    @app.post("/sessions/{session_id}/prompt", response_model=PromptOut)
    def prompt(session_id: str, body: PromptIn):
        session = state.session(session_id)
        if not body.text or not body.text.strip():
            raise HTTPException(status_code=400, detail="prompt text must not be empty")
        with session.lock:
            seed = body.seed if body.seed is not None else len(session.event_log)
            return apply_prompt(state, session, body.text, int(seed))

    @app.get("/map", response_model=MapOut)
    def map_points(session: Optional[str] = None):
        rows = list(state.display_rows)
        if session is not None:
            # prompt-surfaced designs always show, even outside the subset
            sess = state.session(session)
            shown = set(rows)
            for sid in sess.prompt_design_ids:
                row = state.shape_rows[sid]
                if row not in shown:
                    rows.append(row)
                    shown.add(row)
        points = []
        clusters = []
        prompt_rows = set()
        if session is not None:
            prompt_rows = {state.shape_rows[sid] for sid in sess.prompt_design_ids}
        for i in rows:
            s = state.corpus[i]
            points.append({
                "shape_id": s.id,
                "position": [float(state.model.positions[i][0]),
                             float(state.model.positions[i][1])],
                "color_class": "prompt" if i in prompt_rows else "corpus",
            })
            clusters.append(int(state.cluster_labels[i]))
        if session is not None:
            for sid, pos in sess.dynamic_positions.items():
                points.append({"shape_id": sid, "position": [pos[0], pos[1]],
                               "color_class": "llm"})
        return {"points": points, "clusters": clusters}

    @app.get("/sessions/{session_id}/roi-field", response_model=FieldOut)
    def roi_field(session_id: str):
        session = state.session(session_id)
        field_obj = roi.compute_field(session.goodness, state.field_min, state.field_max,
                                      state.config.field_resolution)
        return {**field_obj.to_dict(), "version": session.field_version}

    @app.get("/shapes/{shape_id}/blobs", response_model=ShapeOut)
    def shape_blobs(shape_id: str):
        shape = state.find_shape(shape_id)
        if shape is None:
            raise HTTPException(status_code=404, detail=f"unknown shape {shape_id!r}")
        return bs.shape_to_dict(shape)

    @app.get("/shapes/{shape_id}/mesh")
    def shape_mesh(shape_id: str, resolution: Optional[int] = None):
        shape = state.find_shape(shape_id)
        if shape is None:
            raise HTTPException(status_code=404, detail=f"unknown shape {shape_id!r}")
        res = resolution if resolution is not None else state.config.mesh_resolution
        if not (8 <= res <= 256):
            raise HTTPException(status_code=400, detail="resolution must be in 8..256")
        try:
            mesh = bs.extract_mesh(shape, resolution=res)
        except bs.EmptyMeshError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return Response(content=bs.export_obj(mesh), media_type="text/plain")

    @app.post("/sessions/{session_id}/generate", response_model=GenerateOut)
    def generate(session_id: str, body: GenerateIn):
        session = state.session(session_id)
        with session.lock:
            seed = body.seed if body.seed is not None else len(session.event_log)
            return apply_generate(state, session, body.shape_id,
                                  body.selected_parts, int(seed))

    @app.post("/sessions/{session_id}/choose", response_model=ChooseOut)
    def choose(session_id: str, body: ChooseIn):
        session = state.session(session_id)
        with session.lock:
            return apply_choose(state, session, body.chosen_shape_id, body.other_shape_ids)

    @app.get("/sessions/{session_id}/tree", response_model=TreeOut)
    def tree(session_id: str):
        session = state.session(session_id)
        lay = vt.layout(session.tree)
        return {"tree": vt.serialize(session.tree),
                "layout": [{"shape_id": sid, "position": list(pos)} for sid, pos in lay]}

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = state.session(session_id)
        text = "".join(json.dumps(ev) + "\n" for ev in session.event_log)
        return Response(content=text, media_type="application/x-ndjson")

    @app.post("/sessions/import", response_model=SessionOut)
    def import_session(body: ImportIn):
        session = SessionState(uuid.uuid4().hex[:12])
        for lineno, line in enumerate(body.log.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                event = json.loads(line)
                if event.get("type") not in _EVENT_APPLIERS:
                    raise ValueError(f"unknown event type {event.get('type')!r}")
                replay_event(state, session, event)
            except HTTPException:
                raise
            except Exception as exc:
                raise HTTPException(status_code=400,
                                    detail=f"invalid event at line {lineno}: {exc}")
        with state.sessions_lock:
            state.sessions[session.id] = session
        return {"session_id": session.id}

    return app
