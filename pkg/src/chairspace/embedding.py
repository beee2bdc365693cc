"""2D Exploration Map: neighbor-graph embedding of flattened shapes.

Implements the standard UMAP pipeline from scratch: exact k-NN graph,
per-point bandwidth calibration, fuzzy-union symmetrization, a low-dim
similarity curve fit from min_dist, and a seeded single-threaded SGD
layout with negative sampling.  Structure preservation (trustworthiness,
cluster purity) is the contract, not coordinate parity with any other
implementation.

Also hosts the map utilities that ride on the embedding: k-means++
representative subsampling, k-means clustering of the 2D map, and the
trustworthiness metric used to grade embeddings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy import sparse
from scipy.optimize import curve_fit

SMOOTH_K_TOLERANCE = 1e-5
MIN_K_DIST_SCALE = 1e-3
EXACT_KNN_LIMIT = 20_000
TRANSFORM_REFINE_STEPS = 30
LOW_CONFIDENCE_MEMBERSHIP = 0.1


@dataclass(frozen=True)
class EmbeddingParams:
    n_neighbors: int = 50
    min_dist: float = 0.5
    seed: int = 12
    metric: str = "euclidean"
    n_epochs: int = 200
    n_components: int = 2

    def __post_init__(self):
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")
        if self.min_dist < 0:
            raise ValueError("min_dist must be >= 0")
        if self.metric != "euclidean":
            raise ValueError("only the euclidean metric is supported")
        if self.n_components != 2:
            raise ValueError("the map is always 2D")


@dataclass(frozen=True)
class TransformResult:
    position: np.ndarray
    max_membership: float
    low_confidence: bool


@dataclass
class EmbeddingModel:
    """Fitted 2D map plus everything needed to place new shapes on it."""

    params: EmbeddingParams
    training_vectors: np.ndarray  # (N, d)
    positions: np.ndarray  # (N, 2)
    knn_indices: np.ndarray  # (N, k) incl. self at column 0
    knn_dists: np.ndarray
    rhos: np.ndarray
    sigmas: np.ndarray
    curve_a: float
    curve_b: float

    @property
    def diameter(self) -> float:
        lo = self.positions.min(axis=0)
        hi = self.positions.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.positions.min(axis=0), self.positions.max(axis=0)


# ---------------------------------------------------------------------------
# k-NN and graph construction


def _pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] - 2.0 * (A @ B.T) + (B * B).sum(1)[None, :]
    return np.maximum(d2, 0.0)


def _exact_knn(X: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors (self included), chunked to bound memory."""
    n = len(X)
    idx = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    chunk = max(1, min(n, 2_000_000 // max(n, 1) + 1, 4096))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = _pairwise_sq_dists(X[start:stop], X)
        part = np.argpartition(d2, kth=min(k - 1, n - 1), axis=1)[:, :k]
        pd = np.take_along_axis(d2, part, axis=1)
        order = np.argsort(pd, axis=1, kind="stable")
        idx[start:stop] = np.take_along_axis(part, order, axis=1)
        dists[start:stop] = np.sqrt(np.take_along_axis(pd, order, axis=1))
        # put each row's own index first (distance 0 ties broken arbitrarily)
        for r in range(start, stop):
            row = idx[r]
            self_pos = np.nonzero(row == r)[0]
            if len(self_pos) and self_pos[0] != 0:
                p = self_pos[0]
                row[0], row[p] = row[p], row[0]
                dists[r, 0], dists[r, p] = dists[r, p], dists[r, 0]
    return idx, dists


@njit(cache=True)
def _smooth_knn_dist(knn_dists, k):
    """Per-point bandwidth sigma and connectivity offset rho.

    sigma_i solves sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k)
    by binary search; rho_i is the distance to the nearest distinct neighbor.
    """
    n = knn_dists.shape[0]
    target = np.log2(k)
    rho = np.zeros(n)
    sigma = np.zeros(n)
    mean_all = np.mean(knn_dists)
    for i in range(n):
        lo = 0.0
        hi = np.inf
        mid = 1.0
        di = knn_dists[i]
        nz = di[di > 0.0]
        if nz.shape[0] > 0:
            rho[i] = nz[0]
        for _ in range(64):
            psum = 0.0
            for j in range(1, di.shape[0]):
                d = di[j] - rho[i]
                if d > 0:
                    psum += np.exp(-(d / mid))
                else:
                    psum += 1.0
            if abs(psum - target) < SMOOTH_K_TOLERANCE:
                break
            if psum > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                if hi == np.inf:
                    mid *= 2
                else:
                    mid = (lo + hi) / 2.0
        sigma[i] = mid
        if rho[i] > 0.0:
            mean_i = np.mean(di)
            if sigma[i] < MIN_K_DIST_SCALE * mean_i:
                sigma[i] = MIN_K_DIST_SCALE * mean_i
        else:
            if sigma[i] < MIN_K_DIST_SCALE * mean_all:
                sigma[i] = MIN_K_DIST_SCALE * mean_all
    return sigma, rho


def _fuzzy_graph(knn_indices, knn_dists, sigmas, rhos, n):
    rows, cols, vals = [], [], []
    for i in range(n):
        for j_pos in range(knn_indices.shape[1]):
            j = knn_indices[i, j_pos]
            if j == i:
                continue
            d = knn_dists[i, j_pos] - rhos[i]
            w = 1.0 if d <= 0 else float(np.exp(-d / sigmas[i]))
            rows.append(i)
            cols.append(j)
            vals.append(w)
    G = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    GT = G.T.tocsr()
    # fuzzy set union: w = a + b - a*b
    sym = G + GT - G.multiply(GT)
    sym = sym.tocoo()
    sym.eliminate_zeros()
    return sym


def find_curve_params(spread: float, min_dist: float) -> tuple[float, float]:
    """Fit (1 + a d^(2b))^-1 to the min_dist plateau with exponential tail."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.zeros(xv.shape)
    yv[xv < min_dist] = 1.0
    yv[xv >= min_dist] = np.exp(-(xv[xv >= min_dist] - min_dist) / spread)
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def _pca_init(X: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic 2D PCA projection scaled to the usual layout extent."""
    centered = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2]
    # fix the LAPACK sign ambiguity: largest-magnitude loading positive
    for r in range(2):
        m = np.argmax(np.abs(comps[r]))
        if comps[r, m] < 0:
            comps[r] = -comps[r]
    proj = centered @ comps.T
    extent = np.abs(proj).max()
    if extent > 0:
        proj = proj * (10.0 / extent)
    rng = np.random.default_rng(seed)
    return proj + rng.normal(scale=1e-4, size=proj.shape)


@njit(cache=True, inline="always")
def _xorshift(state):
    s = state[0]
    s ^= s << 13
    s &= 0xFFFFFFFFFFFFFFFF
    s ^= s >> 7
    s ^= s << 17
    s &= 0xFFFFFFFFFFFFFFFF
    state[0] = s
    return s


@njit(cache=True)
def _layout_sgd(emb, heads, tails, epochs_per_sample, n_epochs, a, b,
                gamma, initial_alpha, neg_rate, rng_state):
    """Single-threaded SGD over graph edges with negative sampling.

    Edge sampling follows the epochs-per-sample schedule (strong edges are
    visited every epoch); gradients are clipped to [-4, 4] per coordinate.
    """
    n_vertices = emb.shape[0]
    n_edges = epochs_per_sample.shape[0]
    epochs_per_negative_sample = epochs_per_sample / neg_rate
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()
    epoch_of_next_sample = epochs_per_sample.copy()
    for n in range(n_epochs):
        alpha = initial_alpha * (1.0 - n / n_epochs)
        for i in range(n_edges):
            if epoch_of_next_sample[i] > n:
                continue
            j = heads[i]
            k = tails[i]
            dx = emb[j, 0] - emb[k, 0]
            dy = emb[j, 1] - emb[k, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2 ** b + 1.0)
                gx = min(4.0, max(-4.0, coeff * dx))
                gy = min(4.0, max(-4.0, coeff * dy))
            else:
                gx = 0.0
                gy = 0.0
            emb[j, 0] += gx * alpha
            emb[j, 1] += gy * alpha
            emb[k, 0] -= gx * alpha
            emb[k, 1] -= gy * alpha
            epoch_of_next_sample[i] += epochs_per_sample[i]

            n_neg = int((n - epoch_of_next_negative_sample[i])
                        / epochs_per_negative_sample[i])
            for _ in range(n_neg):
                t = int(_xorshift(rng_state) % np.uint64(n_vertices))
                if t == j:
                    continue
                dx = emb[j, 0] - emb[t, 0]
                dy = emb[j, 1] - emb[t, 1]
                d2 = dx * dx + dy * dy
                if d2 > 0.0:
                    coeff = (2.0 * gamma * b) / ((0.001 + d2) * (a * d2 ** b + 1.0))
                    gx = min(4.0, max(-4.0, coeff * dx))
                    gy = min(4.0, max(-4.0, coeff * dy))
                else:
                    gx = 4.0
                    gy = 4.0
                emb[j, 0] += gx * alpha
                emb[j, 1] += gy * alpha
            epoch_of_next_negative_sample[i] += n_neg * epochs_per_negative_sample[i]
    return emb


def fit_embedding(vectors: np.ndarray, params: EmbeddingParams = EmbeddingParams()) -> EmbeddingModel:
    """Fit the 2D map. Deterministic for fixed (vectors, params)."""
    X = np.ascontiguousarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("vectors must be a 2D matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("vectors contain non-finite values")
    n = len(X)
    k = params.n_neighbors
    if n <= k:
        raise ValueError(f"need more than n_neighbors={k} rows, got {n}")

    knn_idx, knn_d = _exact_knn(X, k)
    sigmas, rhos = _smooth_knn_dist(knn_d, k)
    graph = _fuzzy_graph(knn_idx, knn_d, sigmas, rhos, n)
    a, b = find_curve_params(1.0, params.min_dist)

    emb = np.ascontiguousarray(_pca_init(X, params.seed))
    weights = graph.data
    epochs_per_sample = np.full(len(weights), -1.0)
    n_samples = params.n_epochs * (weights / weights.max())
    mask = n_samples > 0
    epochs_per_sample[mask] = float(params.n_epochs) / n_samples[mask]

    rng_state = np.array([np.uint64(params.seed * 2654435761 + 0x9E3779B97F4A7C15)], dtype=np.uint64)
    emb = _layout_sgd(emb, graph.row.astype(np.int64), graph.col.astype(np.int64),
                      epochs_per_sample, params.n_epochs, a, b,
                      1.0, 1.0, 5, rng_state)

    return EmbeddingModel(params=params, training_vectors=X, positions=np.asarray(emb),
                          knn_indices=knn_idx, knn_dists=knn_d,
                          rhos=np.asarray(rhos), sigmas=np.asarray(sigmas),
                          curve_a=a, curve_b=b)


# ---------------------------------------------------------------------------
# transform of new points


def transform_detailed(model: EmbeddingModel, vector: np.ndarray,
                       refine_steps: int = TRANSFORM_REFINE_STEPS) -> TransformResult:
    """Place one new vector on the fitted map.

    A vector identical to a training row snaps to that row's position.
    Otherwise the position starts at the membership-weighted average of the
    k nearest training positions and is refined by a fixed number of seeded
    SGD steps against those neighbors.  Membership is judged from each
    training point's own bandwidth, so far-away queries get memberships
    near zero and are flagged low-confidence.
    """
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    if v.shape[0] != model.training_vectors.shape[1]:
        raise ValueError("vector dimensionality does not match the model")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite values")

    X = model.training_vectors
    d = np.sqrt(np.maximum(((X - v) ** 2).sum(axis=1), 0.0))
    k = min(model.params.n_neighbors, len(X))
    nn = np.argpartition(d, kth=k - 1)[:k]
    nn = nn[np.argsort(d[nn], kind="stable")]
    nn_d = d[nn]

    if nn_d[0] < 1e-12:
        pos = model.positions[nn[0]].copy()
        return TransformResult(position=pos, max_membership=1.0, low_confidence=False)

    # membership as seen from each training neighbor's calibrated kernel
    memb = np.exp(-np.maximum(0.0, nn_d - model.rhos[nn]) / model.sigmas[nn])
    max_memb = float(memb.max())
    wsum = memb.sum()
    if wsum > 1e-12:
        pos = (memb[:, None] * model.positions[nn]).sum(axis=0) / wsum
    else:
        inv = 1.0 / np.maximum(nn_d, 1e-12)
        pos = (inv[:, None] * model.positions[nn]).sum(axis=0) / inv.sum()

    a, b = model.curve_a, model.curve_b
    rng = np.random.default_rng(model.params.seed)
    attract_w = memb / memb.max() if memb.max() > 0 else memb
    n_train = len(X)
    for step in range(refine_steps):
        alpha = 0.3 * (1.0 - step / refine_steps)
        for j_pos in range(k):
            tgt = model.positions[nn[j_pos]]
            diff = pos - tgt
            d2 = float(diff @ diff)
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (a * d2 ** b + 1.0)
                pos += np.clip(coeff * diff * attract_w[j_pos], -4, 4) * alpha
            for _ in range(2):
                t = int(rng.integers(n_train))
                diff = pos - model.positions[t]
                d2 = float(diff @ diff)
                if d2 > 0.0:
                    coeff = (2.0 * b) / ((0.001 + d2) * (a * d2 ** b + 1.0))
                    pos += np.clip(coeff * diff, -4, 4) * alpha * 0.1
    return TransformResult(position=pos, max_membership=max_memb,
                           low_confidence=max_memb < LOW_CONFIDENCE_MEMBERSHIP)


def transform(model: EmbeddingModel, vector: np.ndarray) -> np.ndarray:
    return transform_detailed(model, vector).position


# ---------------------------------------------------------------------------
# representative subsampling and map clustering


def select_representatives(vectors: np.ndarray, k: int, seed: int) -> list[int]:
    """k-means++ seeding: distinct row indices, squared-distance sampling."""
    X = np.asarray(vectors, dtype=np.float64)
    n = len(X)
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows {n}")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    d2 = ((X - X[first]) ** 2).sum(axis=1)
    chosen_mask = np.zeros(n, dtype=bool)
    chosen_mask[first] = True
    for _ in range(k - 1):
        total = d2.sum()
        if total <= 0:
            candidates = np.nonzero(~chosen_mask)[0]
            nxt = int(rng.choice(candidates))
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        chosen_mask[nxt] = True
        d2 = np.minimum(d2, ((X - X[nxt]) ** 2).sum(axis=1))
    return chosen


def cluster_map(positions: np.ndarray, k: int, seed: int,
                max_iter: int = 300, tol: float = 1e-6) -> np.ndarray:
    """Lloyd's algorithm with k-means++ init; deterministic per seed."""
    X = np.asarray(positions, dtype=np.float64)
    n = len(X)
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    centers = X[select_representatives(X, k, seed)].copy()
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _pairwise_sq_dists(X, centers)
        labels = d2.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centers[c] = X[members].mean(axis=0)
            else:
                # deterministic repair: grab the point farthest from its center
                far = int(np.argmax(d2[np.arange(n), labels]))
                new_centers[c] = X[far]
                labels[far] = c
        shift = np.max(np.linalg.norm(new_centers - centers, axis=1))
        centers = new_centers
        if shift < tol:
            break
    return labels


def kmeans_inertia(positions: np.ndarray, labels: np.ndarray) -> float:
    X = np.asarray(positions, dtype=np.float64)
    total = 0.0
    for c in np.unique(labels):
        pts = X[labels == c]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


# ---------------------------------------------------------------------------
# embedding quality


def trustworthiness(high: np.ndarray, low: np.ndarray, k: int) -> float:
    """Rank-based neighborhood preservation score in [0, 1].

    Penalizes low-space k-neighbors that are not high-space k-neighbors by
    how far down the high-space ranking they sit.
    """
    H = np.asarray(high, dtype=np.float64)
    L = np.asarray(low, dtype=np.float64)
    n = len(H)
    if len(L) != n:
        raise ValueError("high and low must have the same number of rows")
    if not (1 <= k < n / 2):
        raise ValueError("k must satisfy 1 <= k < n/2")
    dh = _pairwise_sq_dists(H, H)
    dl = _pairwise_sq_dists(L, L)
    np.fill_diagonal(dh, np.inf)
    np.fill_diagonal(dl, np.inf)
    order_h = np.argsort(dh, axis=1, kind="stable")
    rank_h = np.empty_like(order_h)
    cols = np.arange(n - 1)
    for i in range(n):
        rank_h[i, order_h[i, : n - 1]] = cols + 1  # 1-based, self excluded
    knn_h = order_h[:, :k]
    knn_l = np.argsort(dl, axis=1, kind="stable")[:, :k]
    t = 0.0
    for i in range(n):
        hset = set(knn_h[i].tolist())
        for j in knn_l[i]:
            if int(j) not in hset:
                t += rank_h[i, j] - k
    return 1.0 - (2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0))) * t


# ---------------------------------------------------------------------------
# persistence


def vectors_digest(vectors: np.ndarray) -> str:
    X = np.ascontiguousarray(vectors, dtype=np.float64)
    return hashlib.sha256(X.tobytes()).hexdigest()


def save_model(model: EmbeddingModel, path: str) -> None:
    """Binary artifact: params + positions + training-vector digest."""
    np.savez(
        path,
        positions=model.positions,
        digest=np.frombuffer(bytes.fromhex(vectors_digest(model.training_vectors)), dtype=np.uint8),
        n_neighbors=model.params.n_neighbors,
        min_dist=model.params.min_dist,
        seed=model.params.seed,
        n_epochs=model.params.n_epochs,
        curve_a=model.curve_a,
        curve_b=model.curve_b,
    )


def load_model(path: str, vectors: np.ndarray) -> EmbeddingModel:
    """Rebuild a model from its artifact plus the original training vectors.

    The vectors are verified against the stored digest; the neighbor
    structure is recomputed (deterministic given the vectors).
    """
    with np.load(path) as data:
        stored = bytes(data["digest"].tobytes()).hex()
        if stored != vectors_digest(vectors):
            raise ValueError("training vectors do not match the stored digest")
        params = EmbeddingParams(
            n_neighbors=int(data["n_neighbors"]),
            min_dist=float(data["min_dist"]),
            seed=int(data["seed"]),
            n_epochs=int(data["n_epochs"]),
        )
        positions = np.asarray(data["positions"])
        curve_a = float(data["curve_a"])
        curve_b = float(data["curve_b"])
    X = np.ascontiguousarray(vectors, dtype=np.float64)
    knn_idx, knn_d = _exact_knn(X, params.n_neighbors)
    sigmas, rhos = _smooth_knn_dist(knn_d, params.n_neighbors)
    return EmbeddingModel(params=params, training_vectors=X, positions=positions,
                          knn_indices=knn_idx, knn_dists=knn_d,
                          rhos=np.asarray(rhos), sigmas=np.asarray(sigmas),
                          curve_a=curve_a, curve_b=curve_b)
