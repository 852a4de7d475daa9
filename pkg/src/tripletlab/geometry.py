"""Geometric primitives on finite labeled point sets.

Distances, diameter, directional projection, thickness and the symmetric
Hausdorff distance, plus the :class:`LabeledPointSet` container and its
JSON reader/writer.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar


class InvalidInputError(ValueError):
    """Input data violates a documented schema or precondition."""


@dataclass(frozen=True, eq=False)
class LabeledPointSet:
    """``N`` points in ``R^n`` with one integer class label each."""

    dimension: int
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if not isinstance(self.dimension, (int, np.integer)) or self.dimension < 1:
            raise InvalidInputError("dimension must be a positive integer")
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, self.dimension)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise InvalidInputError(
                f"points must have shape (N, {self.dimension}), got {pts.shape}")
        if pts.shape[0] == 0:
            raise InvalidInputError("empty point set")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points contain non-finite coordinates")
        labels = np.asarray(self.labels)
        if labels.shape != (pts.shape[0],):
            raise InvalidInputError(
                f"labels must have length {pts.shape[0]}, got {labels.shape}")
        if labels.dtype.kind not in "iu":
            if labels.dtype.kind == "f" and np.all(labels == np.round(labels)):
                labels = labels.astype(np.int64)
            else:
                raise InvalidInputError("labels must be integers")
        pts.setflags(write=False)
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.points.shape[0]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def codes(self) -> np.ndarray:
        """Labels re-coded to ``0..c-1`` in increasing label order."""
        return np.unique(self.labels, return_inverse=True)[1].astype(np.int64)

    def class_points(self, class_id) -> np.ndarray:
        return self.points[self.labels == class_id]

    def with_points(self, points) -> "LabeledPointSet":
        """Same labels, new coordinates."""
        return LabeledPointSet(self.dimension, points, self.labels)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "LabeledPointSet":
        return cls(**_check_schema(data))


def _check_schema(data) -> dict:
    if not isinstance(data, dict):
        raise InvalidInputError("top level: expected a JSON object")
    for key in ("dimension", "points", "labels"):
        if key not in data:
            raise InvalidInputError(f"field '{key}': missing")
    extra = sorted(set(data) - {"dimension", "points", "labels"})
    if extra:
        raise InvalidInputError(f"field '{extra[0]}': unknown field")
    dim = data["dimension"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise InvalidInputError("field 'dimension': expected a positive integer")
    points = data["points"]
    if not isinstance(points, list) or not points:
        raise InvalidInputError("field 'points': expected a non-empty array")
    for i, p in enumerate(points):
        if not isinstance(p, list) or len(p) != dim:
            raise InvalidInputError(
                f"field 'points[{i}]': expected an array of {dim} numbers")
        for j, v in enumerate(p):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidInputError(f"field 'points[{i}][{j}]': expected a finite number")
    labels = data["labels"]
    if not isinstance(labels, list) or len(labels) != len(points):
        raise InvalidInputError(
            f"field 'labels': expected an array of {len(points)} integers")
    for i, v in enumerate(labels):
        if isinstance(v, bool) or not isinstance(v, int):
            raise InvalidInputError(f"field 'labels[{i}]': expected an integer")
    return {"dimension": dim, "points": points, "labels": labels}


def loads(text: str) -> LabeledPointSet:
    """Parse a point set from JSON text, reporting the line of syntax errors."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(
            f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return LabeledPointSet.from_dict(data)


def load(path) -> LabeledPointSet:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidInputError(f"{path}: {exc.strerror}") from None
    try:
        return loads(text)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None


def dump(ps: LabeledPointSet, path) -> None:
    Path(path).write_text(json.dumps(ps.to_dict(), indent=2) + "\n")


def _as_points(points) -> np.ndarray:
    if isinstance(points, LabeledPointSet):
        return points.points
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InvalidInputError("expected a sequence of coordinate vectors")
    return arr


def pairwise_distances(ps) -> np.ndarray:
    """Symmetric ``N x N`` matrix of Euclidean distances."""
    X = _as_points(ps)
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def diameter(points) -> float:
    X = _as_points(points)
    if X.shape[0] == 0:
        raise InvalidInputError("empty point set")
    return float(pairwise_distances(X).max())


def unit_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise InvalidInputError("direction must be non-zero")
    return v / norm


def project_direction(points, e) -> np.ndarray:
    """Dot products ``x_k . e`` for a unit direction ``e``."""
    X = _as_points(points)
    e = np.asarray(e, dtype=float).ravel()
    if e.size != X.shape[1]:
        raise InvalidInputError(
            f"dimension mismatch: direction has {e.size} components, points have {X.shape[1]}")
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise InvalidInputError("direction must be a unit vector")
    return X @ e


def _width(X, e):
    p = X @ e
    return float(p.max() - p.min())


def thickness(points, angular_resolution: int = 360, seed: int = 0) -> float:
    """Minimum over unit directions of the projected diameter.

    In the plane every local minimum of a uniform angular grid is refined by
    golden-section search. In higher dimensions the candidates are the
    coordinate and principal axes, ``angular_resolution`` random directions
    and the normals of ``n - 1`` point differences (exhaustive while their
    count is within ``NORMAL_BUDGET``, which makes the result exact); the
    best few are then refined by projected subgradient steps. The value is
    always attained by an evaluated direction, so it never underestimates.
    """
    if angular_resolution < 8:
        raise InvalidInputError("insufficient resolution")
    X = _as_points(points)
    if X.shape[0] == 0:
        raise InvalidInputError("empty point set")
    X = X - X.mean(axis=0)
    n = X.shape[1]
    if n == 1:
        return float(X.max() - X.min())
    if n == 2:
        return _thickness_2d(X, angular_resolution)
    return _thickness_nd(X, angular_resolution, seed)


def _thickness_2d(X, resolution):
    def w(theta):
        return _width(X, np.array([math.cos(theta), math.sin(theta)]))

    step = math.pi / resolution
    grid = np.array([w(k * step) for k in range(resolution)])
    best = float(grid.min())
    # refine every local minimum of the (pi-periodic) grid, so that nearly tied
    # basins cannot swap under a rotation of the input
    prev, nxt = np.roll(grid, 1), np.roll(grid, -1)
    for k in np.flatnonzero((grid <= prev) & (grid <= nxt)):
        lo, mid, hi = (k - 1) * step, k * step, (k + 1) * step
        if w(lo) > grid[k] and w(hi) > grid[k]:
            res = minimize_scalar(w, bracket=(lo, mid, hi), method="golden",
                                  options={"xtol": 1e-13})
            best = min(best, float(res.fun))
    return best


NORMAL_BUDGET = 20000


def _difference_normals(X, rng, budget=NORMAL_BUDGET):
    """Unit normals of ``n - 1`` point differences.

    The minimum width is attained orthogonally to some such set, so the
    candidates are exhaustive when their number fits the budget and a
    random subsample otherwise.
    """
    N, n = X.shape
    i, j = np.triu_indices(N, 1)
    V = X[j] - X[i]
    V = V[np.linalg.norm(V, axis=1) > 0]
    k = n - 1
    if V.shape[0] < k:
        return np.empty((0, n))
    if math.comb(V.shape[0], k) <= budget:
        combos = np.array(list(itertools.combinations(range(V.shape[0]), k)))
    else:
        combos = np.argsort(rng.random((budget, V.shape[0])), axis=1)[:, :k]
    return np.linalg.svd(V[combos], full_matrices=True)[2][:, -1, :]


def _thickness_nd(X, resolution, seed):
    n = X.shape[1]
    rng = np.random.default_rng(seed)
    E = rng.normal(size=(resolution, n))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    # principal axes catch flat sets exactly
    E = np.vstack([np.eye(n), np.linalg.svd(X, full_matrices=True)[2], E,
                   _difference_normals(X, rng)])
    P = X @ E.T
    widths = P.max(axis=0) - P.min(axis=0)
    best = float(widths.min())
    scale = float(widths.max()) or 1.0
    for j in np.argsort(widths, kind="stable")[:8]:
        e = E[j]
        cur = _width(X, e)
        lr = 0.1
        for _ in range(200):
            p = X @ e
            g = X[np.argmax(p)] - X[np.argmin(p)]
            g = g - (g @ e) * e
            gn = np.linalg.norm(g)
            if gn <= 1e-15 * scale:
                break
            cand = e - lr * g / gn
            cand /= np.linalg.norm(cand)
            wc = _width(X, cand)
            if wc < cur:
                e, cur = cand, wc
            else:
                lr *= 0.5
                if lr < 1e-12:
                    break
        best = min(best, cur)
    return best


def hausdorff_distance(A, B) -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    A = _as_points(A)
    B = _as_points(B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise InvalidInputError("empty point set")
    if A.shape[1] != B.shape[1]:
        raise InvalidInputError("dimension mismatch")
    diff = A[:, None, :] - B[None, :, :]
    C = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(max(C.min(axis=1).max(), C.min(axis=0).max()))
