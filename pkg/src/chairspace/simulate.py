"""Synthetic-user harness for ROI convergence.

Stands in for a human study: a hidden goodness peak is planted on the map
and a scripted user plays generation rounds against the inference loop.
Each round the harness expands the design closest to the current inferred
peak, the synthetic user picks the best of {parent + 3 children} under the
hidden goodness (argmax when noiseless, softmax otherwise), and the choice
feeds the model.  The recorded metric is the distance from the inferred
field argmax to the hidden target, per round.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import blobshape as bs
from . import embedding as em
from . import generation as gen
from . import roi

_GROUP_NAMES = tuple(bs.PART_GROUPS.keys())


@dataclass(frozen=True)
class SimulationConfig:
    target: tuple[float, float]
    rounds: int = 15
    options_per_round: int = 4
    noise_beta: float = math.inf  # softmax temperature 1/beta; inf = argmax
    field_resolution: tuple[int, int] = (100, 100)
    success_fraction: float = 0.1  # of map diameter


@dataclass
class SeedResult:
    seed: int
    per_round_distance: list[float]
    final_distance: float
    final_regret: float
    success: bool


def hidden_goodness(positions: np.ndarray, target: np.ndarray, diameter: float) -> np.ndarray:
    """exp(-||p - target||^2 / (2 * 0.05 * D^2))"""
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    d2 = ((p - np.asarray(target)) ** 2).sum(axis=1)
    return np.exp(-d2 / (2.0 * 0.05 * diameter ** 2))


def _field_bounds(model: em.EmbeddingModel) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = model.bounds()
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def run_seed(seed: int, corpus: Sequence[bs.Shape], model: em.EmbeddingModel,
             kernel: roi.KernelParams, cfg: SimulationConfig) -> SeedResult:
    rng = np.random.default_rng([seed, 7919])
    lo, hi = _field_bounds(model)
    diameter = model.diameter
    target = np.asarray(cfg.target, dtype=np.float64)
    if np.any(target < lo) or np.any(target > hi):
        raise ValueError(f"target {cfg.target} lies outside the map bounds")

    center = 0.5 * (lo + hi)
    # the walk starts where the zero-field argmax points: the map center
    start = int(np.argmin(((model.positions - center) ** 2).sum(axis=1)))
    current = corpus[start]
    current_pos = np.array(model.positions[start], dtype=np.float64)

    pool_pos = [current_pos]
    goodness: Optional[roi.GoodnessModel] = None
    per_round: list[float] = []

    for _ in range(cfg.rounds):
        # the user keeps editing whatever they last chose
        group = _GROUP_NAMES[int(rng.integers(len(_GROUP_NAMES)))]
        parts = bs.PART_GROUPS[group]
        adjectives = tuple(rng.choice(gen.VOCABULARY, size=5, replace=False))
        gen_seed = int(rng.integers(2 ** 31))
        children = gen.generate_alternatives(
            [], [], current, parts, gen.mock_provider, seed=gen_seed,
            count=cfg.options_per_round - 1, adjectives=adjectives)

        options: list[tuple[bs.Shape, np.ndarray]] = [(current, current_pos)]
        for child, _attr in children:
            pos = em.transform(model, bs.flatten(child))
            options.append((child, pos))
            pool_pos.append(pos)

        gstar = hidden_goodness(np.array([p for _, p in options]), target, diameter)
        if math.isinf(cfg.noise_beta):
            pick = int(np.argmax(gstar))
        else:
            logits = cfg.noise_beta * gstar
            p = np.exp(logits - logits.max())
            p /= p.sum()
            pick = int(rng.choice(len(options), p=p))

        chosen_shape, chosen_pos = options[pick]
        other_ids = [o.id for i, (o, _) in enumerate(options) if i != pick]
        positions = {o.id: (float(p[0]), float(p[1])) for o, p in options}
        goodness = roi.record_choice(goodness, chosen_shape.id, other_ids,
                                     positions, kernel=kernel)

        field_obj = roi.compute_field(goodness, lo, hi, cfg.field_resolution)
        per_round.append(float(np.linalg.norm(field_obj.argmax_position() - target)))
        current, current_pos = chosen_shape, chosen_pos

    if cfg.rounds == 0:
        final_distance = float(np.linalg.norm(center - target))
    else:
        final_distance = per_round[-1]

    # recommend the best visited design under the fitted model; regret against
    # the hidden optimum (goodness 1.0 at the target)
    visited = np.asarray(pool_pos)
    if goodness is not None:
        best = int(np.argmax(roi.predict_mean_many(goodness, visited)))
    else:
        best = 0
    final_regret = float(1.0 - hidden_goodness(visited[best][None, :], target, diameter)[0])

    return SeedResult(seed=seed, per_round_distance=per_round,
                      final_distance=final_distance, final_regret=final_regret,
                      success=final_distance <= cfg.success_fraction * diameter)


def run_simulation(corpus: Sequence[bs.Shape], model: em.EmbeddingModel,
                   cfg: SimulationConfig, seeds: Sequence[int],
                   kernel: Optional[roi.KernelParams] = None) -> dict:
    kernel = kernel or roi.KernelParams.for_map_diameter(model.diameter)
    results = [run_seed(s, corpus, model, kernel, cfg) for s in seeds]
    if cfg.rounds > 0:
        mean_distance = np.mean([r.per_round_distance for r in results], axis=0).tolist()
    else:
        mean_distance = []
    return {
        "seeds": [
            {"seed": r.seed, "per_round_distance": r.per_round_distance,
             "final_regret": r.final_regret}
            for r in results
        ],
        "aggregate": {
            "mean_distance": mean_distance,
            "success_rate": float(np.mean([r.success for r in results])),
            "mean_final_regret": float(np.mean([r.final_regret for r in results])),
        },
        "target": [float(cfg.target[0]), float(cfg.target[1])],
        "diameter": model.diameter,
        "rounds": cfg.rounds,
        "noise_beta": None if math.isinf(cfg.noise_beta) else cfg.noise_beta,
    }


def write_metrics(metrics: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")


def plot_convergence(metrics: dict, path: str) -> None:
    """Optional SVG of mean argmax-to-target distance per round."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    mean = metrics["aggregate"]["mean_distance"]
    fig, ax = plt.subplots(figsize=(6, 4))
    for entry in metrics["seeds"]:
        ax.plot(range(1, len(entry["per_round_distance"]) + 1),
                entry["per_round_distance"], color="0.8", lw=0.6)
    ax.plot(range(1, len(mean) + 1), mean, color="crimson", lw=2.0, label="mean")
    ax.axhline(0.1 * metrics["diameter"], color="steelblue", ls="--", lw=1.0,
               label="success radius")
    ax.set_xlabel("round")
    ax.set_ylabel("field argmax to target distance")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
