"""Text-conditional generation: adjective transforms, suggestions, providers.

The adjective vocabulary is realized as a deterministic transform engine
over part latents.  A provider turns a generation request (base vector,
selected parts, adjectives) into candidate design vectors; the mock
provider drives the transform engine directly and always works offline,
while the remote provider posts the request to a configured HTTP endpoint
and falls back entry-by-entry to the mock on bad output.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import httpx
import numpy as np

from . import blobshape as bs

FEATURE_DIM = 6  # height, width, anisotropy, openness, tilt, volume

_FEATURE_NAMES = ("height", "width", "anisotropy", "openness", "tilt", "volume")


class ProviderError(RuntimeError):
    """The provider could not deliver a usable response."""


@dataclass(frozen=True)
class AdjectiveRule:
    name: str
    target_groups: tuple[str, ...]
    feature_vector: np.ndarray
    transform: Callable[[bs.PartLatent, float], bs.PartLatent]

    def __post_init__(self):
        v = np.asarray(self.feature_vector, dtype=np.float64).reshape(FEATURE_DIM)
        v.flags.writeable = False
        object.__setattr__(self, "feature_vector", v)


@dataclass(frozen=True)
class SuggestionSet:
    aligned: tuple[str, str, str]
    diversified: tuple[str, str, str]

    def __post_init__(self):
        if set(self.aligned) & set(self.diversified):
            raise ValueError("aligned and diversified suggestions must be disjoint")


@dataclass(frozen=True)
class GenerationRequest:
    base: np.ndarray  # flattened 256-vector
    selected_parts: tuple[int, ...]
    adjectives: tuple[str, ...]
    count: int = 3
    seed: int = 0

    def __post_init__(self):
        v = np.asarray(self.base, dtype=np.float64).reshape(bs.FLAT_DIM)
        v.flags.writeable = False
        object.__setattr__(self, "base", v)
        object.__setattr__(self, "selected_parts", tuple(int(i) for i in self.selected_parts))
        object.__setattr__(self, "adjectives", tuple(self.adjectives))

    def to_dict(self) -> dict:
        return {
            "base": self.base.tolist(),
            "selected_parts": list(self.selected_parts),
            "adjectives": list(self.adjectives),
            "count": self.count,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GenerationResult:
    vector: np.ndarray
    adjective: str


@dataclass(frozen=True)
class GenerationResponse:
    results: tuple[GenerationResult, ...]


# ---------------------------------------------------------------------------
# transform primitives (all identity at magnitude 0)


def _replace(part: bs.PartLatent, **kw) -> bs.PartLatent:
    return bs.PartLatent(
        center=kw.get("center", part.center),
        eigenvalues=kw.get("eigenvalues", part.eigenvalues),
        eigenvectors=kw.get("eigenvectors", part.eigenvectors),
        blend_weight=kw.get("blend_weight", part.blend_weight),
    )


def _translate_z(part, dz):
    return _replace(part, center=part.center + np.array([0.0, 0.0, dz]))


def _spread_x(part, dx):
    s = 1.0 if part.center[0] >= 0 else -1.0
    return _replace(part, center=part.center + np.array([s * dx, 0.0, 0.0]))


def _horizontal_axes(part) -> np.ndarray:
    # two principal axes most orthogonal to the vertical
    vert = np.abs(part.eigenvectors[2, :])
    return np.argsort(vert, kind="stable")[:2]


def _scale_horizontal(part, factor):
    lam = part.eigenvalues.copy()
    lam[_horizontal_axes(part)] *= factor
    return _replace(part, eigenvalues=lam)


def _scale_all(part, factor):
    return _replace(part, eigenvalues=part.eigenvalues * factor)


def _rotate_about_x(part, deg):
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    R = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    return _replace(part, eigenvectors=R @ part.eigenvectors)


def _ratio_shift(part, t):
    """t > 0 pulls eigenvalue ratios toward 1 (rounder); t < 0 pushes away.

    Volume-preserving: lam' = gm * (lam / gm)^(1 - t) around the geometric
    mean gm.  Clamped so eigenvalues stay positive and bounded.
    """
    lam = part.eigenvalues
    gm = float(np.exp(np.mean(np.log(lam))))
    expo = np.clip(1.0 - t, 0.25, 2.5)
    return _replace(part, eigenvalues=gm * (lam / gm) ** expo)


def _pull_center(part, target, t):
    return _replace(part, center=part.center + t * (np.asarray(target) - part.center))


def _quantize_centers(part, t, q=0.2):
    snapped = np.round(part.center / q) * q
    return _replace(part, center=part.center + t * (snapped - part.center))


def _scale_weight(part, factor):
    return _replace(part, blend_weight=part.blend_weight * factor)


def _group_centroid(shape: bs.Shape, indices: Sequence[int]) -> np.ndarray:
    return np.mean([shape.parts[i].center for i in indices], axis=0)


# ---------------------------------------------------------------------------
# the vocabulary (canonical order matters: defaults come from it)


def _build_rules() -> dict[str, AdjectiveRule]:
    rules: dict[str, AdjectiveRule] = {}

    def rule(name, groups, feats, fn):
        rules[name] = AdjectiveRule(name=name, target_groups=tuple(groups),
                                    feature_vector=np.array(feats, dtype=np.float64),
                                    transform=fn)

    rule("open", ("arms",), (0, 0.2, 0, 1, 0, 0),
         lambda p, m, ctx: _spread_x(p, m * 0.25))
    rule("wide", ("seat",), (0, 1, 0, 0, 0, 0.3),
         lambda p, m, ctx: _scale_horizontal(p, 1.0 + m))
    rule("thin", ("seat",), (0, -1, 0, 0, 0, -0.3),
         lambda p, m, ctx: _scale_horizontal(p, 1.0 - 0.4 * m))
    rule("round", ("back",), (0, 0, -1, 0, 0, 0),
         lambda p, m, ctx: _ratio_shift(p, m))
    rule("angular", ("back",), (0, 0, 1, 0, 0, 0),
         lambda p, m, ctx: _ratio_shift(p, -0.8 * m))
    rule("high", ("back",), (1, 0, 0, 0, 0, 0),
         lambda p, m, ctx: _translate_z(p, m * 0.3))
    rule("low", ("back",), (-1, 0, 0, 0, 0, 0),
         lambda p, m, ctx: _translate_z(p, -m * 0.3))
    rule("tilt-forward", ("back",), (0, 0, 0, 0, 1, 0),
         lambda p, m, ctx: _rotate_about_x(p, m * 20.0))
    rule("incline", ("back",), (0.1, 0, 0, 0, -1, 0),
         lambda p, m, ctx: _rotate_about_x(p, -m * 15.0))
    rule("curved", ("back",), (0, 0, -0.6, 0, 0.4, 0),
         lambda p, m, ctx: _rotate_about_x(_ratio_shift(p, 0.5 * m), m * 8.0))
    rule("voluminous", ("seat",), (0.1, 0.3, 0, 0, 0, 1),
         lambda p, m, ctx: _scale_weight(_scale_all(p, 1.0 + 0.8 * m), 1.0 + 0.2 * m))
    rule("sleek", ("seat",), (0, -0.2, 0, 0, 0, -1),
         lambda p, m, ctx: _scale_all(p, 1.0 - 0.35 * m))
    rule("geometric", ("back",), (0, 0, 0.8, 0, 0, -0.1),
         lambda p, m, ctx: _quantize_centers(_ratio_shift(p, -0.5 * m), m))
    rule("fluid", ("back",), (0, 0, -0.7, 0.2, 0, 0.1),
         lambda p, m, ctx: _pull_center(_ratio_shift(p, 0.6 * m), ctx, 0.15 * m))
    rule("faceted", ("back",), (0, 0, 0.9, 0, 0, 0.2),
         lambda p, m, ctx: _scale_weight(_ratio_shift(p, -0.6 * m), 1.0 + 0.15 * m))
    rule("organic", ("back",), (0, 0, -0.8, 0.1, 0, 0.2),
         lambda p, m, ctx: _scale_weight(_pull_center(_ratio_shift(p, 0.7 * m), ctx, 0.1 * m), 1.0 + 0.1 * m))
    return rules


_RULES = _build_rules()
VOCABULARY: tuple[str, ...] = tuple(_RULES.keys())


def rule_for(name: str) -> AdjectiveRule:
    if name not in _RULES:
        raise KeyError(f"unknown adjective {name!r}")
    return _RULES[name]


def apply_adjective(shape: bs.Shape, parts: Sequence[int], adjective: str,
                    magnitude: float, seed: int = 0) -> bs.Shape:
    """Deterministic part-local edit; unselected parts pass through untouched.

    `seed` is reserved for stochastic rules; the current vocabulary is
    fully deterministic.
    """
    if adjective not in _RULES:
        raise KeyError(f"unknown adjective {adjective!r}")
    sel = tuple(int(i) for i in parts)
    if not sel:
        raise ValueError("at least one part must be selected")
    if any(not (0 <= i < bs.N_PARTS) for i in sel):
        raise ValueError("part index out of range")
    if not (0.0 <= magnitude <= 1.0):
        raise ValueError("magnitude must be in [0, 1]")
    if magnitude == 0.0:
        return shape
    rule = _RULES[adjective]
    ctx = _group_centroid(shape, sel)
    new_parts = list(shape.parts)
    for i in sel:
        new_parts[i] = rule.transform(shape.parts[i], magnitude, ctx)
    return bs.Shape(id=f"{shape.id}+{adjective}", parts=tuple(new_parts),
                    provenance="llm_edit", parent_id=shape.id, label=adjective)


# ---------------------------------------------------------------------------
# shape summary features (for suggestion scoring and prompt retrieval)

_KEYWORD_FEATURES = {
    "tall": (0.8, 0, 0, 0, 0, 0),
    "short": (-0.8, 0, 0, 0, 0, 0),
    "narrow": (0, -0.8, 0, 0, 0, 0),
    "slim": (0, -0.6, 0, 0, 0, -0.4),
    "big": (0, 0.3, 0, 0, 0, 0.8),
    "large": (0, 0.3, 0, 0, 0, 0.8),
    "small": (0, -0.3, 0, 0, 0, -0.8),
    "soft": (0, 0, -0.7, 0, 0, 0.2),
    "sharp": (0, 0, 0.8, 0, 0, 0),
    "boxy": (0, 0.2, 0.6, 0, 0, 0.3),
    "airy": (0, 0, 0, 0.7, 0, -0.3),
}


def shape_features(shape: bs.Shape) -> np.ndarray:
    """Morphology summary on the same 6 axes as the rule feature vectors."""
    weights = np.array([p.blend_weight for p in shape.parts])
    total = weights.sum()
    if total <= 0:
        return np.zeros(FEATURE_DIM)
    centers = np.array([p.center for p in shape.parts])
    height = float((weights * centers[:, 2]).sum() / total) / 0.4

    lams = np.array([p.eigenvalues for p in shape.parts])
    horiz = np.sqrt(lams[:, :2].mean(axis=1))
    width = float((weights * horiz).sum() / total) / 0.15 - 1.0

    aniso = float((weights * (lams.max(axis=1) / lams.min(axis=1))).sum() / total)
    aniso = np.tanh((aniso - 4.0) / 4.0)

    arm_w = sum(shape.parts[i].blend_weight for i in bs.PART_GROUPS["arms"])
    openness = 2.0 * float(arm_w / total) - 0.3

    tilt = 0.0
    for i in bs.PART_GROUPS["back"]:
        p = shape.parts[i]
        if p.blend_weight > 0:
            # forward lean of the most-vertical principal axis
            ax = p.eigenvectors[:, int(np.argmax(np.abs(p.eigenvectors[2, :])))]
            ax = ax if ax[2] >= 0 else -ax
            tilt += float(np.arctan2(ax[1], ax[2]))
    tilt = tilt / 4.0 / 0.3

    volume = float((weights * np.sqrt(lams.prod(axis=1))).sum() / total) / 0.001 - 1.0
    return np.clip([height, width, aniso, openness, tilt, volume], -2.0, 2.0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


_WORD_RE = re.compile(r"[a-z][a-z\-]*")


def _tokenize(text: str) -> list[str]:
    text = text.lower().replace("tilt forward", "tilt-forward")
    return _WORD_RE.findall(text)


def adjectives_in(text: str) -> list[str]:
    return [t for t in _tokenize(text) if t in _RULES]


def session_feature_vector(prompt_history: Sequence[str],
                           roi_shapes: Sequence[bs.Shape]) -> np.ndarray:
    """Aggregate feature direction of the session so far.

    Combines the rule vectors of adjectives already used, loose keyword
    cues from the prompts, and latent summary statistics of the shapes the
    user has gravitated toward.
    """
    parts = []
    used = used_adjectives(prompt_history)
    if used:
        parts.append(np.mean([_RULES[a].feature_vector for a in used], axis=0))
    kw = np.zeros(FEATURE_DIM)
    n_kw = 0
    for text in prompt_history:
        for tok in _tokenize(text):
            if tok in _KEYWORD_FEATURES:
                kw += np.array(_KEYWORD_FEATURES[tok])
                n_kw += 1
    if n_kw:
        parts.append(0.5 * kw / n_kw)
    if roi_shapes:
        parts.append(0.5 * np.mean([shape_features(s) for s in roi_shapes], axis=0))
    if not parts:
        return np.zeros(FEATURE_DIM)
    return np.sum(parts, axis=0)


def used_adjectives(prompt_history: Sequence[str]) -> list[str]:
    seen: list[str] = []
    for text in prompt_history:
        for adj in adjectives_in(text):
            if adj not in seen:
                seen.append(adj)
    return seen


def _ranked_vocabulary(session_vec: np.ndarray, exclude: set[str]) -> list[str]:
    scored = [(a, _cosine(session_vec, _RULES[a].feature_vector)) for a in VOCABULARY
              if a not in exclude]
    idx = {a: i for i, a in enumerate(VOCABULARY)}
    return [a for a, _ in sorted(scored, key=lambda t: (-t[1], idx[t[0]]))]


def suggest_adjectives(prompt_history: Sequence[str],
                       roi_shapes: Sequence[bs.Shape] = ()) -> SuggestionSet:
    """3 aligned + 3 diversified unused adjectives; fixed set for no history."""
    vec = session_feature_vector(prompt_history, roi_shapes)
    if not np.any(vec):
        return SuggestionSet(aligned=VOCABULARY[:3], diversified=VOCABULARY[-3:])
    used = set(used_adjectives(prompt_history))
    if len(VOCABULARY) - len(used) < 6:
        # too few unused terms: fall back to ranking the whole vocabulary
        used = set()
    ranked = _ranked_vocabulary(vec, used)
    return SuggestionSet(aligned=tuple(ranked[:3]), diversified=tuple(ranked[-3:][::-1]))


def extraction_adjectives(prompt_history: Sequence[str],
                          roi_shapes: Sequence[bs.Shape] = ()) -> tuple[str, ...]:
    """Five adjectives for a generation round: 3 aligned + 2 diversified."""
    s = suggest_adjectives(prompt_history, roi_shapes)
    return s.aligned + s.diversified[:2]


# ---------------------------------------------------------------------------
# providers


def mock_provider(request: GenerationRequest) -> GenerationResponse:
    """Offline provider: drives the transform engine directly.

    Variant j applies every requested adjective at a base magnitude from
    {0.4, 0.7, 1.0} with per-adjective seeded jitter; the attribution is
    the adjective that contributed the largest effective magnitude.
    """
    base_shape = bs.unflatten(request.base, id="mock-base", provenance="llm_edit")
    if not request.adjectives:
        raise ProviderError("mock provider needs at least one adjective")
    results = []
    base_mags = (0.4, 0.7, 1.0)
    untouched = [i for i in range(bs.N_PARTS) if i not in request.selected_parts]
    for j in range(request.count):
        rng = np.random.default_rng([request.seed & 0x7FFFFFFF, j])
        mag = base_mags[j % 3] + rng.uniform(-0.1, 0.1) + 0.05 * (j // 3)
        mag = float(np.clip(mag, 0.05, 1.0))
        current = base_shape
        best_adj, best_m = request.adjectives[0], -1.0
        for adj in request.adjectives:
            m = float(np.clip(mag * rng.uniform(0.6, 1.0), 0.0, 1.0))
            current = apply_adjective(current, request.selected_parts, adj, m)
            if m > best_m:
                best_adj, best_m = adj, m
        vector = bs.flatten(current)
        # unedited parts pass through bit-exactly (unflatten re-projection
        # perturbs eigenvector blocks at round-off level otherwise)
        for i in untouched:
            vector[i * bs.PART_DIM:(i + 1) * bs.PART_DIM] = \
                request.base[i * bs.PART_DIM:(i + 1) * bs.PART_DIM]
        results.append(GenerationResult(vector=vector, adjective=best_adj))
    return GenerationResponse(results=tuple(results))


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str
    api_key: Optional[str] = None
    timeout: float = 20.0


class RemoteProvider:
    """POSTs the request to an HTTP endpoint; repairs or backfills bad entries."""

    def __init__(self, config: ProviderConfig, client: Optional[httpx.Client] = None):
        self.config = config
        self._client = client  # injectable for tests; None means a one-shot client

    def __call__(self, request: GenerationRequest) -> GenerationResponse:
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        try:
            if self._client is not None:
                resp = self._client.post(self.config.endpoint_url, json=request.to_dict(),
                                         headers=headers, timeout=self.config.timeout)
            else:
                resp = httpx.post(self.config.endpoint_url, json=request.to_dict(),
                                  headers=headers, timeout=self.config.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except Exception as exc:
            raise ProviderError(f"remote provider failed: {exc}") from exc

        raw = payload.get("results")
        if not isinstance(raw, list):
            raise ProviderError("remote provider returned no results list")
        results: list[GenerationResult] = []
        for entry in raw[: request.count]:
            try:
                vec = np.asarray(entry["vector"], dtype=np.float64).reshape(bs.FLAT_DIM)
                if not np.all(np.isfinite(vec)):
                    raise ValueError("non-finite vector")
                repaired = bs.unflatten(vec, id="probe", provenance="llm_edit")
                adjective = str(entry.get("adjective", request.adjectives[0] if request.adjectives else ""))
                results.append(GenerationResult(vector=bs.flatten(repaired), adjective=adjective))
            except Exception:
                continue  # dropped; backfilled below
        if len(results) < request.count:
            fill = mock_provider(request)
            for r in fill.results:
                if len(results) >= request.count:
                    break
                results.append(r)
        return GenerationResponse(results=tuple(results[: request.count]))


def generate_alternatives(prompt_history: Sequence[str], roi_shapes: Sequence[bs.Shape],
                          shape: bs.Shape, parts: Sequence[int],
                          provider: Callable[[GenerationRequest], GenerationResponse],
                          seed: int, count: int = 3,
                          adjectives: Optional[Sequence[str]] = None) -> list[tuple[bs.Shape, str]]:
    """One generation round: `count` fresh child shapes with attributions.

    Extracts five adjectives from the session history (unless given), asks
    the provider, and falls back to the mock provider wholesale on failure.
    Child ids are derived from the parent, the seed and the result content,
    so a replayed round reproduces identical ids.
    """
    sel = tuple(int(i) for i in parts)
    if not sel:
        raise ValueError("at least one part must be selected")
    if adjectives is None:
        adjectives = extraction_adjectives(prompt_history, roi_shapes)
    adjectives = tuple(adjectives)
    request = GenerationRequest(base=bs.flatten(shape), selected_parts=sel,
                                adjectives=adjectives, count=count, seed=seed)
    try:
        response = provider(request)
        if len(response.results) != count:
            raise ProviderError(
                f"provider returned {len(response.results)} results, expected {count}")
    except ProviderError:
        response = mock_provider(request)

    children: list[tuple[bs.Shape, str]] = []
    for j, result in enumerate(response.results):
        digest = hashlib.sha1(np.ascontiguousarray(result.vector).tobytes()).hexdigest()[:8]
        child_id = f"{shape.id}.g{seed}.{j}-{digest}"
        child = bs.unflatten(result.vector, id=child_id, provenance="llm_edit",
                             parent_id=shape.id, label=result.adjective)
        children.append((child, result.adjective))
    return children


# ---------------------------------------------------------------------------
# prompt-to-design retrieval

_ARCHETYPE_NOUNS = {
    "armchair": "armchair",
    "sofa": "sofa",
    "couch": "sofa",
    "settee": "sofa",
    "stool": "stool",
    "dining": "dining",
    "barstool": "bar",
    "bar": "bar",
}


def prompt_to_designs(prompt: str, corpus: Sequence[bs.Shape], positions: np.ndarray,
                      count: int = 5, seed: int = 0,
                      cluster_labels: Optional[np.ndarray] = None) -> list[bs.Shape]:
    """Retrieve `count` corpus designs matching a text prompt.

    Nouns map to archetypes, vocabulary adjectives to feature directions;
    prompts with neither get a seeded diverse sample, one per map cluster.
    """
    tokens = _tokenize(prompt)
    archetypes = {_ARCHETYPE_NOUNS[t] for t in tokens if t in _ARCHETYPE_NOUNS}
    adjectives = [t for t in tokens if t in _RULES]
    rng = np.random.default_rng(seed)
    n = len(corpus)
    if count > n:
        raise ValueError("count exceeds corpus size")

    if not archetypes and not adjectives:
        if cluster_labels is None:
            from .embedding import cluster_map  # local import avoids a cycle
            cluster_labels = cluster_map(positions, max(count, 2), seed)
        picks: list[int] = []
        for c in np.unique(cluster_labels):
            members = np.nonzero(cluster_labels == c)[0]
            picks.append(int(members[rng.integers(len(members))]))
            if len(picks) == count:
                break
        i = 0
        while len(picks) < count:  # fewer clusters than requested designs
            if i not in picks:
                picks.append(i)
            i += 1
        return [corpus[i] for i in picks[:count]]

    want = np.zeros(FEATURE_DIM)
    for adj in adjectives:
        want += _RULES[adj].feature_vector
    scores = np.zeros(n)
    for i, s in enumerate(corpus):
        if archetypes and s.label in archetypes:
            scores[i] += 10.0
        if adjectives:
            scores[i] += _cosine(shape_features(s), want)
    order = rng.permutation(n)  # seeded tie-shuffle, then stable sort by score
    order = order[np.argsort(-scores[order], kind="stable")]
    return [corpus[i] for i in order[:count]]
