"""Region-of-interest inference on the 2D map from choice events.

Each generation round yields one choice event: the picked design is the
"chosen option", the non-picked alternatives are the "other options".  A
latent goodness value lives at every distinct map position referenced by
an event; choices enter through a softmax (one-of-N) likelihood and the
latent field carries a Gaussian-process prior with a squared-exponential
kernel.  The posterior mode is found by damped Newton iterations and the
predicted mean is what the map renders as gradient contours.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

SUPPORT_MERGE_TOL = 1e-9
NEWTON_GRAD_TOL = 1e-8
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class ChoiceEvent:
    chosen: str
    others: tuple[str, ...]
    positions: dict[str, tuple[float, float]]
    sequence_no: int

    def __post_init__(self):
        object.__setattr__(self, "others", tuple(self.others))
        if not self.others:
            raise ValueError("a choice event needs at least one other option")
        ids = (self.chosen,) + self.others
        if len(set(ids)) != len(ids):
            raise ValueError("choice event ids must be distinct")
        if self.chosen in self.others:
            raise ValueError("chosen id must not appear among the others")
        for sid in ids:
            if sid not in self.positions:
                raise ValueError(f"missing position for {sid!r}")
            p = self.positions[sid]
            if not np.all(np.isfinite(p)):
                raise ValueError(f"non-finite position for {sid!r}")

    def option_ids(self) -> tuple[str, ...]:
        return (self.chosen,) + self.others


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float = 1.0
    length_scale: float = 1.0
    noise_jitter: float = 1e-6

    def __post_init__(self):
        if self.signal_variance <= 0 or self.length_scale <= 0 or self.noise_jitter <= 0:
            raise ValueError("kernel parameters must all be positive")

    @classmethod
    def for_map_diameter(cls, diameter: float, signal_variance: float = 1.0,
                         noise_jitter: float = 1e-6) -> "KernelParams":
        """Default length scale: 0.15 x map diameter."""
        return cls(signal_variance=signal_variance,
                   length_scale=0.15 * diameter,
                   noise_jitter=noise_jitter)


@dataclass(frozen=True)
class GoodnessField:
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    resolution: tuple[int, int]
    values: np.ndarray  # (nx, ny)

    @property
    def vmin(self) -> float:
        return float(self.values.min())

    @property
    def vmax(self) -> float:
        return float(self.values.max())

    def grid_axes(self) -> tuple[np.ndarray, np.ndarray]:
        nx, ny = self.resolution
        return (np.linspace(self.bounds_min[0], self.bounds_max[0], nx),
                np.linspace(self.bounds_min[1], self.bounds_max[1], ny))

    def argmax_position(self) -> np.ndarray:
        """Map position of the highest-valued grid cell; center for a flat field."""
        if np.all(self.values == self.values.flat[0]):
            return 0.5 * (self.bounds_min + self.bounds_max)
        ix, iy = np.unravel_index(int(self.values.argmax()), self.values.shape)
        xs, ys = self.grid_axes()
        return np.array([xs[ix], ys[iy]])

    def to_dict(self) -> dict:
        return {
            "bounds": {"min": self.bounds_min.tolist(), "max": self.bounds_max.tolist()},
            "resolution": list(self.resolution),
            "values": self.values.tolist(),
            "vmin": self.vmin,
            "vmax": self.vmax,
        }


@dataclass(frozen=True)
class GoodnessModel:
    kernel: KernelParams
    support_points: np.ndarray  # (M, 2)
    g_map: np.ndarray  # (M,)
    events: tuple[ChoiceEvent, ...]
    chol: tuple  # cached Cholesky factor of K
    alpha: np.ndarray  # K^-1 g_map

    def support_index(self, position: Sequence[float]) -> int:
        d = np.linalg.norm(self.support_points - np.asarray(position), axis=1)
        i = int(np.argmin(d))
        if d[i] > SUPPORT_MERGE_TOL * 10:
            raise KeyError(f"no support point at {position}")
        return i


# ---------------------------------------------------------------------------
# BTL likelihood


def btl_log_likelihood(g_values: np.ndarray, chosen_index: int) -> float:
    """log P(chosen | options) under softmax choice: g_c - logsumexp(g).

    Computed max-subtracted throughout, (g_c - m) - log sum exp(g - m), so
    adding a constant to all options cancels before any rounding.
    """
    g = np.asarray(g_values, dtype=np.float64).reshape(-1)
    if g.shape[0] < 2:
        raise ValueError("an event needs at least 2 options")
    if not (0 <= chosen_index < g.shape[0]):
        raise ValueError("chosen_index out of range")
    d = g - np.max(g)
    return float(d[chosen_index] - np.log(np.sum(np.exp(d))))


def btl_probabilities(g_values: np.ndarray) -> np.ndarray:
    """Softmax choice probabilities (exact normalization)."""
    g = np.asarray(g_values, dtype=np.float64).reshape(-1)
    e = np.exp(g - np.max(g))
    return e / e.sum()


# ---------------------------------------------------------------------------
# support assembly and the MAP objective


def build_support(events: Sequence[ChoiceEvent]) -> tuple[np.ndarray, list[list[int]]]:
    """Merged support points plus per-event option index lists.

    Positions within SUPPORT_MERGE_TOL of an existing support point share
    its row, so repeated designs never create near-singular kernel rows.
    The chosen option is always index 0 of each event's list.
    """
    points: list[np.ndarray] = []
    event_indices: list[list[int]] = []
    for ev in events:
        idxs = []
        for sid in ev.option_ids():
            p = np.asarray(ev.positions[sid], dtype=np.float64)
            found = -1
            for i, q in enumerate(points):
                if np.linalg.norm(p - q) <= SUPPORT_MERGE_TOL:
                    found = i
                    break
            if found < 0:
                points.append(p)
                found = len(points) - 1
            idxs.append(found)
        event_indices.append(idxs)
    return np.asarray(points).reshape(-1, 2), event_indices


def _se_kernel(A: np.ndarray, B: np.ndarray, kernel: KernelParams) -> np.ndarray:
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
    return kernel.signal_variance * np.exp(-0.5 * d2 / kernel.length_scale ** 2)


def map_objective(g: np.ndarray, event_indices: list[list[int]], K_inv: np.ndarray) -> float:
    """Sum of event log likelihoods minus the GP prior quadratic."""
    total = -0.5 * float(g @ K_inv @ g)
    for idxs in event_indices:
        total += btl_log_likelihood(g[idxs], 0)
    return total


def map_gradient(g: np.ndarray, event_indices: list[list[int]], K_inv: np.ndarray) -> np.ndarray:
    grad = -(K_inv @ g)
    for idxs in event_indices:
        p = btl_probabilities(g[idxs])
        np.add.at(grad, idxs, -p)
        grad[idxs[0]] += 1.0
    return grad


def _btl_hessian_w(g: np.ndarray, event_indices: list[list[int]]) -> np.ndarray:
    """W such that the objective Hessian is -(W + K^-1); W is PSD."""
    M = g.shape[0]
    W = np.zeros((M, M))
    for idxs in event_indices:
        p = btl_probabilities(g[idxs])
        block = np.diag(p) - np.outer(p, p)
        ix = np.asarray(idxs)
        # scatter-add; duplicate indices within an event accumulate correctly
        for a in range(len(ix)):
            for b in range(len(ix)):
                W[ix[a], ix[b]] += block[a, b]
    return W


def fit_map(events: Sequence[ChoiceEvent], kernel: KernelParams) -> GoodnessModel:
    """MAP latent goodness at the merged support points.

    Damped Newton ascent from g = 0; the Hessian -(W + K^-1) is negative
    definite so the Newton direction always ascends, with step halving as
    a safety net.  Deterministic: no randomness anywhere.
    """
    events = tuple(events)
    if not events:
        raise ValueError("need at least one choice event")
    support, event_indices = build_support(events)
    M = len(support)
    K = _se_kernel(support, support, kernel) + kernel.noise_jitter * np.eye(M)
    try:
        chol = cho_factor(K, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("kernel matrix is not positive definite after jitter") from exc
    K_inv = cho_solve(chol, np.eye(M))
    K_inv = 0.5 * (K_inv + K_inv.T)

    g = np.zeros(M)
    obj = map_objective(g, event_indices, K_inv)
    for _ in range(NEWTON_MAX_ITER):
        grad = map_gradient(g, event_indices, K_inv)
        if np.max(np.abs(grad)) < NEWTON_GRAD_TOL:
            break
        H = _btl_hessian_w(g, event_indices) + K_inv
        try:
            delta = cho_solve(cho_factor(H, lower=True), grad)
        except np.linalg.LinAlgError:
            delta = np.linalg.solve(H + 1e-10 * np.eye(M), grad)
        step = 1.0
        while step > 1e-8:
            g_new = g + step * delta
            obj_new = map_objective(g_new, event_indices, K_inv)
            if obj_new >= obj:
                g, obj = g_new, obj_new
                break
            step *= 0.5
        else:
            break
    alpha = cho_solve(chol, g)
    return GoodnessModel(kernel=kernel, support_points=support, g_map=g,
                         events=events, chol=chol, alpha=alpha)


# ---------------------------------------------------------------------------
# prediction


def predict_mean(model: GoodnessModel, x: Sequence[float]) -> float:
    """k(x, X) K^-1 g at one map position."""
    return float(predict_mean_many(model, np.asarray(x, dtype=np.float64).reshape(1, 2))[0])


def predict_mean_many(model: GoodnessModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64).reshape(-1, 2)
    k = _se_kernel(X, model.support_points, model.kernel)
    return k @ model.alpha


def compute_field(model: Optional[GoodnessModel], bounds_min: Sequence[float],
                  bounds_max: Sequence[float], resolution: tuple[int, int]) -> GoodnessField:
    """Predicted mean on a uniform grid; all zeros when no events exist yet."""
    bounds_min = np.asarray(bounds_min, dtype=np.float64).reshape(2)
    bounds_max = np.asarray(bounds_max, dtype=np.float64).reshape(2)
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("field resolution must be at least 2x2")
    if model is None:
        values = np.zeros((nx, ny))
    else:
        xs = np.linspace(bounds_min[0], bounds_max[0], nx)
        ys = np.linspace(bounds_min[1], bounds_max[1], ny)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        values = predict_mean_many(model, pts).reshape(nx, ny)
    return GoodnessField(bounds_min=bounds_min, bounds_max=bounds_max,
                         resolution=(nx, ny), values=values)


@dataclass(frozen=True)
class RankedCandidate:
    id: str
    position: tuple[float, float]
    score: float


def rank_candidates(model: Optional[GoodnessModel],
                    candidates: Sequence[tuple[str, Sequence[float]]]) -> list[RankedCandidate]:
    """Candidates sorted by predicted mean descending, ties by id ascending."""
    if model is None:
        scores = [0.0] * len(candidates)
    else:
        pts = np.asarray([c[1] for c in candidates], dtype=np.float64).reshape(-1, 2)
        scores = predict_mean_many(model, pts).tolist() if len(candidates) else []
    ranked = [RankedCandidate(id=c[0], position=(float(c[1][0]), float(c[1][1])), score=s)
              for c, s in zip(candidates, scores)]
    return sorted(ranked, key=lambda r: (-r.score, r.id))


def record_choice(model: Optional[GoodnessModel], chosen: str, others: Sequence[str],
                  positions: dict[str, tuple[float, float]],
                  kernel: Optional[KernelParams] = None) -> GoodnessModel:
    """Append one choice event and refit; returns a new model value."""
    if model is None:
        if kernel is None:
            raise ValueError("a kernel is required for the first choice event")
        events: tuple[ChoiceEvent, ...] = ()
    else:
        kernel = model.kernel
        events = model.events
    seq = events[-1].sequence_no + 1 if events else 0
    ev = ChoiceEvent(chosen=chosen, others=tuple(others),
                     positions={k: (float(v[0]), float(v[1])) for k, v in positions.items()},
                     sequence_no=seq)
    return fit_map(events + (ev,), kernel)


# ---------------------------------------------------------------------------
# event-log persistence (JSON Lines)


def save_events(events: Sequence[ChoiceEvent], path: str) -> None:
    """One event per line: {seq, chosen, others, positions:{id:[x,y]}}."""
    import json

    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps({
                "seq": ev.sequence_no,
                "chosen": ev.chosen,
                "others": list(ev.others),
                "positions": {k: [v[0], v[1]] for k, v in ev.positions.items()},
            }) + "\n")


def load_events(path: str) -> list[ChoiceEvent]:
    import json

    events = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            events.append(ChoiceEvent(
                chosen=d["chosen"], others=tuple(d["others"]),
                positions={k: (float(v[0]), float(v[1])) for k, v in d["positions"].items()},
                sequence_no=int(d["seq"])))
    return events
