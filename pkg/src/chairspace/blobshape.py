"""Part-aware Gaussian-blob shape model.

A chair is represented by 16 ellipsoidal blobs, each parameterized by a
center, the eigenvalues and eigenvectors of its covariance, and a blending
weight.  The per-part parameters flatten into a 256-vector (16 parts x 16
numbers) which is the working representation for embedding and generation.

Axis convention (fixed for the whole system): x is lateral (left/right),
y is depth (front/back, back at negative y), z is vertical.  Shapes are
authored inside [-1, 1]^3; field evaluation uses a [-1.1, 1.1]^3 grid so
isosurfaces never clip at the boundary.

Part index convention: 0-3 legs, 4-7 seat, 8-11 back, 12-14 arms,
15 connector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from skimage.measure import marching_cubes as _sk_marching_cubes

N_PARTS = 16
PART_DIM = 16  # 3 center + 3 eigenvalues + 9 eigenvector entries + 1 weight
FLAT_DIM = N_PARTS * PART_DIM

GRID_BOUND = 1.1
DEFAULT_ISO_LEVEL = 0.125
DEFAULT_MESH_RESOLUTION = 64
PREVIEW_MESH_RESOLUTION = 32

PROVENANCES = ("prompt", "llm_edit", "procedural", "corpus")

PART_GROUPS: dict[str, tuple[int, ...]] = {
    "legs": (0, 1, 2, 3),
    "seat": (4, 5, 6, 7),
    "back": (8, 9, 10, 11),
    "arms": (12, 13, 14),
    "connector": (15,),
}

ARCHETYPES = ("armchair", "dining", "stool", "sofa", "bar")

_ORTHO_TOL = 1e-6


class ShapeValidationError(ValueError):
    """A part or shape violates a structural invariant."""


class EmptyMeshError(ValueError):
    """The iso level sits above the maximum of the occupancy field."""

    def __init__(self, message: str, observed_max: float):
        super().__init__(message)
        self.observed_max = observed_max


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PartLatent:
    """One blob: center, principal variances, principal axes, blend weight."""

    center: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are the principal axes
    blend_weight: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_readonly(np.asarray(self.center).reshape(3)))
        object.__setattr__(self, "eigenvalues", _as_readonly(np.asarray(self.eigenvalues).reshape(3)))
        object.__setattr__(self, "eigenvectors", _as_readonly(np.asarray(self.eigenvectors).reshape(3, 3)))
        object.__setattr__(self, "blend_weight", float(self.blend_weight))
        self.validate()

    def validate(self) -> None:
        if not np.all(np.isfinite(self.center)):
            raise ShapeValidationError("part center contains non-finite values")
        if not np.all(np.isfinite(self.eigenvalues)) or np.any(self.eigenvalues <= 0):
            raise ShapeValidationError("eigenvalues must all be strictly positive")
        U = self.eigenvectors
        if not np.all(np.isfinite(U)):
            raise ShapeValidationError("eigenvector matrix contains non-finite values")
        norms = np.linalg.norm(U, axis=0)
        if np.any(np.abs(norms - 1.0) > _ORTHO_TOL):
            raise ShapeValidationError("eigenvector columns must be unit length")
        gram = U.T @ U
        off = gram - np.diag(np.diag(gram))
        if np.max(np.abs(off)) > _ORTHO_TOL:
            raise ShapeValidationError("eigenvector columns must be pairwise orthogonal")
        if abs(abs(np.linalg.det(U)) - 1.0) > _ORTHO_TOL:
            raise ShapeValidationError("eigenvector matrix determinant must be +/-1")
        if self.blend_weight < 0:
            raise ShapeValidationError("blend weight must be non-negative")

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartLatent):
            return NotImplemented
        return (
            np.array_equal(self.center, other.center)
            and np.array_equal(self.eigenvalues, other.eigenvalues)
            and np.array_equal(self.eigenvectors, other.eigenvectors)
            and self.blend_weight == other.blend_weight
        )

    def flat(self) -> np.ndarray:
        """16 numbers: center, eigenvalues, eigenvectors (column-major), weight."""
        return np.concatenate([
            self.center,
            self.eigenvalues,
            self.eigenvectors.flatten(order="F"),
            [self.blend_weight],
        ])


@dataclass(frozen=True, eq=False)
class Shape:
    """A 16-part blob shape with identity and provenance."""

    id: str
    parts: tuple[PartLatent, ...]
    provenance: str
    parent_id: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.parts) != N_PARTS:
            raise ShapeValidationError(f"shape must have exactly {N_PARTS} parts, got {len(self.parts)}")
        if self.provenance not in PROVENANCES:
            raise ShapeValidationError(f"unknown provenance {self.provenance!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Shape):
            return NotImplemented
        return (
            self.id == other.id
            and self.provenance == other.provenance
            and self.parent_id == other.parent_id
            and self.label == other.label
            and all(a == b for a, b in zip(self.parts, other.parts))
        )


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3)
    triangles: np.ndarray  # (T, 3) int indices
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", _as_readonly(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)))
        tri = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        tri.flags.writeable = False
        object.__setattr__(self, "triangles", tri)
        if self.normals is not None:
            object.__setattr__(self, "normals", _as_readonly(np.asarray(self.normals).reshape(-1, 3)))
        if self.triangles.size and self.triangles.max() >= len(self.vertices):
            raise ShapeValidationError("triangle index out of range")


def covariance(part: PartLatent) -> np.ndarray:
    """Covariance U diag(lambda) U^T of one blob, symmetrized to round-off."""
    part.validate()
    U = part.eigenvectors
    C = (U * part.eigenvalues) @ U.T
    return 0.5 * (C + C.T)


def _inverse_covariances(shape: Shape) -> np.ndarray:
    """Stack of per-part inverse covariances, shape (16, 3, 3)."""
    inv = np.empty((N_PARTS, 3, 3))
    for i, p in enumerate(shape.parts):
        U = p.eigenvectors
        inv[i] = (U / p.eigenvalues) @ U.T
    return inv


def occupancy(shape: Shape, point: Sequence[float]) -> float:
    """Unnormalized Gaussian-mixture field value at one point."""
    pt = np.asarray(point, dtype=np.float64).reshape(1, 3)
    return float(occupancy_many(shape, pt)[0])


def occupancy_many(shape: Shape, points: np.ndarray) -> np.ndarray:
    """Vectorized occupancy over an (N, 3) array of query points.

    The mixture is unnormalized so a lone blob peaks at its blend weight,
    which keeps iso-level semantics independent of blob scale.
    """
    pts = np.asarray(points, dtype=np.float64)
    out = np.zeros(len(pts))
    for p in shape.parts:
        if p.blend_weight == 0.0:
            continue
        d = pts - p.center
        # Mahalanobis form via the eigenbasis: ((d @ U) ** 2 / lambda).sum
        proj = d @ p.eigenvectors
        maha = np.einsum("ij,ij->i", proj * (1.0 / p.eigenvalues), proj)
        out += p.blend_weight * np.exp(-0.5 * maha)
    return out


def _triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def extract_mesh(shape: Shape, resolution: int = DEFAULT_MESH_RESOLUTION,
                 iso_level: float = DEFAULT_ISO_LEVEL) -> TriangleMesh:
    """Marching-cubes isosurface of the occupancy field.

    The field is sampled on a uniform resolution^3 grid spanning
    [-GRID_BOUND, GRID_BOUND]^3.  Raises EmptyMeshError when the iso level
    exceeds the field maximum on the grid.
    """
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if iso_level <= 0:
        raise ValueError("iso_level must be positive")
    axis = np.linspace(-GRID_BOUND, GRID_BOUND, resolution)
    step = axis[1] - axis[0]
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    volume = occupancy_many(shape, pts).reshape(resolution, resolution, resolution)
    vmax = float(volume.max())
    if iso_level >= vmax:
        raise EmptyMeshError(
            f"iso level {iso_level} is at or above the field maximum {vmax:.6g}", vmax)
    verts, faces, normals, _ = _sk_marching_cubes(volume, level=iso_level,
                                                  spacing=(step, step, step))
    verts = verts + (-GRID_BOUND)
    areas = _triangle_areas(verts, faces)
    keep = areas > 1e-12
    return TriangleMesh(vertices=verts, triangles=faces[keep], normals=normals)


def export_obj(mesh: TriangleMesh) -> bytes:
    """Wavefront OBJ text: `v x y z` lines, then 1-based `f a b c` lines."""
    if len(mesh.triangles) == 0:
        raise ValueError("cannot export a mesh with no triangles")
    lines = [f"v {v[0]:.8f} {v[1]:.8f} {v[2]:.8f}" for v in mesh.vertices]
    lines += [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in mesh.triangles]
    return ("\n".join(lines) + "\n").encode("ascii")


# ---------------------------------------------------------------------------
# flatten / unflatten


def flatten(shape: Shape) -> np.ndarray:
    """256-vector of all part parameters in part order."""
    return np.concatenate([p.flat() for p in shape.parts])


def _nearest_orthonormal(M: np.ndarray) -> np.ndarray:
    # Polar factor via SVD; preserves reflections (|det| = 1 either sign).
    W, _, Vt = np.linalg.svd(M)
    return W @ Vt


def unflatten(v: np.ndarray, id: str, provenance: str,
              parent_id: Optional[str] = None, label: Optional[str] = None) -> Shape:
    """Rebuild a Shape from a 256-vector.

    Near-orthonormal eigenvector blocks (noisy provider output) are repaired
    by nearest-orthonormal projection; blocks whose determinant magnitude is
    below 0.5 before projection are rejected as non-repairable.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != FLAT_DIM:
        raise ShapeValidationError(f"flattened shape must have length {FLAT_DIM}, got {v.shape[0]}")
    parts = []
    for i in range(N_PARTS):
        block = v[i * PART_DIM:(i + 1) * PART_DIM]
        U_raw = block[6:15].reshape(3, 3, order="F")
        det = np.linalg.det(U_raw)
        if abs(det) < 0.5:
            raise ShapeValidationError(
                f"part {i}: eigenvector block is non-repairable (|det| = {abs(det):.3g} < 0.5)")
        U = _nearest_orthonormal(U_raw)
        parts.append(PartLatent(center=block[0:3], eigenvalues=block[3:6],
                                eigenvectors=U, blend_weight=block[15]))
    return Shape(id=id, parts=tuple(parts), provenance=provenance,
                 parent_id=parent_id, label=label)


# ---------------------------------------------------------------------------
# procedural generator

def _lam(half_extent: float) -> float:
    # Variance so the iso-0.125 surface of a unit-weight blob sits at
    # half_extent along this axis: r = sqrt(-2 lambda ln iso).
    return (half_extent / 2.0394) ** 2


def _rot_x(deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def _rot_y(deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


# archetype table: seat height, seat half-width/depth, back top, arm flag,
# back flag, leg thickness, back tilt (deg)
_ARCH_TABLE = {
    "armchair": dict(seat_z=0.00, wx=0.45, wy=0.42, back_top=0.55, arms=True, back=True, leg_t=0.050, tilt=8.0),
    "dining":   dict(seat_z=0.05, wx=0.34, wy=0.34, back_top=0.62, arms=False, back=True, leg_t=0.045, tilt=4.0),
    "stool":    dict(seat_z=0.12, wx=0.26, wy=0.26, back_top=None, arms=False, back=False, leg_t=0.040, tilt=0.0),
    "sofa":     dict(seat_z=-0.05, wx=0.80, wy=0.42, back_top=0.45, arms=True, back=True, leg_t=0.060, tilt=10.0),
    "bar":      dict(seat_z=0.38, wx=0.22, wy=0.22, back_top=0.62, arms=False, back=True, leg_t=0.038, tilt=2.0),
}

_FLOOR_Z = -0.85


def generate_procedural_chair(archetype: str, seed: int) -> Shape:
    """Deterministic 16-blob chair for one archetype and seed.

    Blobs follow the fixed part-index convention; absent groups (arms on a
    stool, back on a stool) are emitted with blend weight zero so every
    shape keeps the full 16-part layout.

    Per-shape variation is driven by a small latent factor vector (scale,
    width, depth, height, tilt, thickness, weight) so each archetype forms
    a low-dimensional, well-embeddable manifold in flattened space while
    archetypes stay far apart.
    """
    if archetype not in _ARCH_TABLE:
        raise ValueError(f"unknown archetype {archetype!r}; expected one of {ARCHETYPES}")
    a = _ARCH_TABLE[archetype]
    rng = np.random.default_rng([int(seed), ARCHETYPES.index(archetype)])

    # latent factors: everything below is a smooth function of these eight,
    # so each archetype spans a broad low-dimensional manifold
    f_scale = rng.uniform(0.88, 1.12)
    f_width = rng.uniform(0.75, 1.28)
    f_depth = rng.uniform(0.80, 1.22)
    f_height = rng.uniform(-0.07, 0.07)
    f_tilt = rng.uniform(-5.0, 5.0)
    f_thick = rng.uniform(0.72, 1.28)
    f_weight = rng.uniform(0.85, 1.15)
    f_backh = rng.uniform(0.82, 1.22)

    seat_z = (a["seat_z"] + f_height) * f_scale
    wx = min(a["wx"] * f_width * f_scale, 0.88)
    wy = a["wy"] * f_depth * f_scale
    leg_t = a["leg_t"] * f_thick
    parts: list[PartLatent] = []

    # legs 0-3
    leg_top = seat_z - 0.02
    leg_cz = 0.5 * (_FLOOR_Z + leg_top)
    leg_h = 0.5 * (leg_top - _FLOOR_Z)
    splay = 6.0 + 0.6 * f_tilt if archetype in ("stool", "bar") else 0.0
    for sx, sy in ((-1, -1), (1, -1), (-1, 1), (1, 1)):
        U = np.eye(3)
        if splay:
            U = _rot_x(-sy * splay) @ _rot_y(sx * splay)
        parts.append(PartLatent(
            center=[sx * (wx - 0.07), sy * (wy - 0.07), leg_cz],
            eigenvalues=[_lam(leg_t), _lam(leg_t), _lam(leg_h * 0.85)],
            eigenvectors=U,
            blend_weight=0.9 * f_weight,
        ))

    # seat 4-7: 2x2 slab
    for sx, sy in ((-1, -1), (1, -1), (-1, 1), (1, 1)):
        parts.append(PartLatent(
            center=[sx * wx * 0.5, sy * wy * 0.5, seat_z + 0.03],
            eigenvalues=[_lam(wx * 0.62), _lam(wy * 0.62), _lam(0.06 * f_thick)],
            eigenvectors=np.eye(3),
            blend_weight=1.0 * f_weight,
        ))

    # back 8-11: two columns x two rows behind the seat
    if a["back"]:
        back_top = seat_z + (a["back_top"] - a["seat_z"]) * f_backh * f_scale
        back_y = -(wy - 0.03)
        span = back_top - seat_z
        tilt = _rot_x(-(a["tilt"] + f_tilt))
        for sx, level in ((-1, 0), (1, 0), (-1, 1), (1, 1)):
            cz = seat_z + span * (0.45 + 0.35 * level)
            parts.append(PartLatent(
                center=[sx * wx * 0.45, back_y, cz],
                eigenvalues=[_lam(wx * 0.55), _lam(0.045 * f_thick), _lam(span * 0.33)],
                eigenvectors=tilt,
                blend_weight=0.95 * f_weight,
            ))
    else:
        for sx, level in ((-1, 0), (1, 0), (-1, 1), (1, 1)):
            parts.append(PartLatent(
                center=[sx * wx * 0.3, 0.0, seat_z],
                eigenvalues=[_lam(0.05), _lam(0.05), _lam(0.05)],
                eigenvectors=np.eye(3),
                blend_weight=0.0,
            ))

    # arms 12-14: left rail, right rail, front pad
    if a["arms"]:
        arm_z = seat_z + 0.20
        for i, (cx, cy, ex, ey) in enumerate((
            (-(wx + 0.04), 0.0, 0.05 * f_thick, wy * 0.8),
            (+(wx + 0.04), 0.0, 0.05 * f_thick, wy * 0.8),
            (0.0, wy * 0.7, wx * 0.5, 0.05 * f_thick),
        )):
            w = 0.8 * f_weight if i < 2 else 0.35 * f_weight
            parts.append(PartLatent(
                center=[cx, cy, arm_z],
                eigenvalues=[_lam(max(ex, 0.03)), _lam(max(ey, 0.03)), _lam(0.05)],
                eigenvectors=np.eye(3),
                blend_weight=w,
            ))
    else:
        for cx in (-0.2, 0.2, 0.0):
            parts.append(PartLatent(
                center=[cx, 0.0, seat_z + 0.1],
                eigenvalues=[_lam(0.04), _lam(0.04), _lam(0.04)],
                eigenvectors=np.eye(3),
                blend_weight=0.0,
            ))

    # connector 15: seat/back junction, or an under-seat brace when backless
    if a["back"]:
        parts.append(PartLatent(
            center=[0.0, -(wy - 0.05), seat_z + 0.08],
            eigenvalues=[_lam(wx * 0.5), _lam(0.05), _lam(0.06)],
            eigenvectors=np.eye(3),
            blend_weight=0.5 * f_weight,
        ))
    else:
        parts.append(PartLatent(
            center=[0.0, 0.0, seat_z - 0.18],
            eigenvalues=[_lam(wx * 0.55), _lam(wy * 0.55), _lam(0.03)],
            eigenvectors=np.eye(3),
            blend_weight=0.45 * f_weight,
        ))

    return Shape(id=f"proc-{archetype}-{seed}", parts=tuple(parts),
                 provenance="procedural", label=archetype)


# ---------------------------------------------------------------------------
# JSON serialization

def shape_to_dict(shape: Shape) -> dict:
    return {
        "id": shape.id,
        "provenance": shape.provenance,
        "parent_id": shape.parent_id,
        "label": shape.label,
        "parts": [
            {
                "center": p.center.tolist(),
                "eigenvalues": p.eigenvalues.tolist(),
                # columns of the eigenvector matrix
                "eigenvectors": [p.eigenvectors[:, j].tolist() for j in range(3)],
                "weight": p.blend_weight,
            }
            for p in shape.parts
        ],
    }


def shape_from_dict(d: dict) -> Shape:
    parts = []
    for pd in d["parts"]:
        U = np.column_stack([np.asarray(col, dtype=np.float64) for col in pd["eigenvectors"]])
        parts.append(PartLatent(center=pd["center"], eigenvalues=pd["eigenvalues"],
                                eigenvectors=U, blend_weight=pd["weight"]))
    return Shape(id=d["id"], parts=tuple(parts), provenance=d["provenance"],
                 parent_id=d.get("parent_id"), label=d.get("label"))


def save_corpus(shapes: Iterable[Shape], path: str) -> None:
    """JSON Lines, one shape per line."""
    with open(path, "w") as fh:
        for s in shapes:
            fh.write(json.dumps(shape_to_dict(s)) + "\n")


def load_corpus(path: str) -> list[Shape]:
    shapes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                shapes.append(shape_from_dict(json.loads(line)))
    return shapes


def generate_corpus(size: int, seed: int) -> Iterator[Shape]:
    """Archetypes round-robin with per-shape derived seeds."""
    for i in range(size):
        archetype = ARCHETYPES[i % len(ARCHETYPES)]
        yield generate_procedural_chair(archetype, seed * 1_000_003 + i)
