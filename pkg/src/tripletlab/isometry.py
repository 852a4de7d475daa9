"""Isometric error, near-isometry defect and rigid alignment of embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    InvalidInputError,
    LabeledPointSet,
    diameter,
    pairwise_distances,
    thickness,
)


@dataclass(frozen=True, eq=False)
class RigidIsometry:
    """``x -> Q x + t`` with ``Q`` orthogonal (reflections allowed)."""

    Q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        t = np.array(self.t, dtype=float).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or t.size != Q.shape[0]:
            raise InvalidInputError("isometry needs a square Q and matching t")
        if np.abs(Q @ Q.T - np.eye(Q.shape[0])).max() > 1e-10:
            raise InvalidInputError("Q is not orthogonal")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls, n: int) -> "RigidIsometry":
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def random(cls, n: int, rng, translation_scale: float = 1.0) -> "RigidIsometry":
        """Haar-random orthogonal factor (either determinant) and Gaussian shift."""
        A = rng.normal(size=(n, n))
        Q, R = np.linalg.qr(A)
        Q = Q * np.sign(np.diag(R))
        if rng.random() < 0.5:
            Q[:, 0] = -Q[:, 0]
        return cls(Q, translation_scale * rng.normal(size=n))

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.Q))

    def apply(self, points) -> np.ndarray:
        X = points.points if isinstance(points, LabeledPointSet) else np.asarray(points, dtype=float)
        return X @ self.Q.T + self.t

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "t": self.t.tolist()}


@dataclass(frozen=True, eq=False)
class EmbeddingPair:
    """Two embeddings of the same data points, aligned by index."""

    f: LabeledPointSet
    g: LabeledPointSet

    def __post_init__(self):
        if len(self.f) != len(self.g):
            raise InvalidInputError("embedding pair: point counts differ")
        if self.f.dimension != self.g.dimension:
            raise InvalidInputError("embedding pair: dimensions differ")
        if not np.array_equal(self.f.labels, self.g.labels):
            raise InvalidInputError("embedding pair: labels differ")


def _distance_discrepancy(A, B) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[0] != B.shape[0]:
        raise InvalidInputError("length mismatch")
    return float(np.max(np.abs(pairwise_distances(A) - pairwise_distances(B))))


def d_iso(pair: EmbeddingPair) -> float:
    """Largest discrepancy between the distance matrices of ``f`` and ``g``."""
    return _distance_discrepancy(pair.f.points, pair.g.points)


def nearisometry_defect(domain, image) -> float:
    """Smallest ``eps`` for which ``domain[k] -> image[k]`` is an eps-nearisometry."""
    domain = np.asarray(domain, dtype=float)
    image = np.asarray(image, dtype=float)
    if domain.ndim == 1:
        domain = domain[:, None]
    if image.ndim == 1:
        image = image[:, None]
    if domain.shape[0] != image.shape[0]:
        raise InvalidInputError("length mismatch")
    return _distance_discrepancy(domain, image)


# singular values of the cross-covariance below sqrt(eps) * s_max leave their
# directions poorly determined; those are re-solved from the projected data
_SPLIT = np.sqrt(np.finfo(float).eps)
# data thinner than this fraction of the main extent carries no usable signal
_THIN = 1e-13


def _orthogonal_factor(F, G, Uf, Ug, scale=None):
    """Orthogonal map of ``span(Uf)`` onto ``span(Ug)`` aligning centered ``F`` to ``G``.

    Least squares on the well-conditioned directions, recursing into the
    thin complement; directions without signal get the rotation between the
    complements closest to the identity.
    """
    n = F.shape[1]
    k = Uf.shape[1]
    if k == 0:
        return np.zeros((n, n))
    U, s, Vt = np.linalg.svd((F @ Uf).T @ (G @ Ug))
    V = Vt.T
    scale = s[0] if scale is None else scale
    if s[0] == 0 or s[0] <= _THIN ** 2 * scale:
        W, _, Zt = np.linalg.svd(Ug.T @ Uf)
        return Ug @ (W @ Zt) @ Uf.T
    r = int(np.sum(s > _SPLIT * s[0]))
    Q = (Ug @ V[:, :r]) @ (Uf @ U[:, :r]).T
    if r < k:
        Q = Q + _orthogonal_factor(F, G, Uf @ U[:, r:], Ug @ V[:, r:], scale)
    return Q


def align_isometry(pair: EmbeddingPair) -> tuple[RigidIsometry, float]:
    """Least-squares rigid map ``U`` with ``g ~ U(f)`` and ``max_k ||g_k - U(f_k)||``."""
    F = pair.f.points
    G = pair.g.points
    cf = F.mean(axis=0)
    cg = G.mean(axis=0)
    n = F.shape[1]
    Q = _orthogonal_factor(F - cf, G - cg, np.eye(n), np.eye(n))
    U = RigidIsometry(Q, cg - Q @ cf)
    residual = float(np.max(np.linalg.norm(G - U.apply(F), axis=1)))
    return U, residual


@dataclass
class CnTrial:
    trial: int
    epsilon: float
    measured_epsilon: float
    residual: float
    thickness: float
    ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CnEstimate:
    dimension: int
    q: float
    trials: int
    c_hat: float
    table: list[CnTrial] = field(default_factory=list)

    @property
    def ratios(self) -> list[float]:
        return [row.ratio for row in self.table]

    def to_dict(self) -> dict:
        return {
            "n": self.dimension,
            "q": self.q,
            "trials": self.trials,
            "c_hat": self.c_hat,
            "ratios": self.ratios,
            "table": [row.to_dict() for row in self.table],
        }


def _thick_set(n, size, q, rng, max_attempts, resolution):
    for _ in range(max_attempts):
        A = rng.uniform(-1.0, 1.0, size=(size, n))
        diam = diameter(A)
        if diam <= 0:
            continue
        A = (A - A.mean(axis=0)) / diam
        th = thickness(A, resolution)
        if th >= q:
            return A, th
    raise InvalidInputError("thickness floor unreachable")


def estimate_cn(
    dimension: int,
    trials: int = 30,
    epsilon_grid=(1e-3, 1e-2, 1e-1),
    q: float = 0.5,
    seed: int = 0,
    points_per_set: int | None = None,
    max_attempts: int = 10000,
    angular_resolution: int = 90,
) -> CnEstimate:
    """Empirical constant of the isometric approximation property.

    Each trial draws a set of unit diameter with thickness at least ``q``,
    a random rigid motion and, per grid value ``eps``, a perturbation of at
    most ``eps / 2`` per point. The ratio ``residual * q / eps_measured`` of
    the least-squares alignment is recorded; ``c_hat`` is its maximum.
    """
    if trials < 30:
        raise InvalidInputError("estimate_cn needs at least 30 trials")
    if not 0 < q <= 1:
        raise InvalidInputError("thickness floor q must lie in (0, 1]")
    if any(e < 0 for e in epsilon_grid):
        raise InvalidInputError("perturbation sizes must be nonnegative")
    size = points_per_set or 2 * dimension + 2
    table = []
    seeds = np.random.SeedSequence(seed).spawn(trials)
    for k, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        A, th = _thick_set(dimension, size, q, rng, max_attempts, angular_resolution)
        U0 = RigidIsometry.random(dimension, rng)
        base = U0.apply(A)
        for eps in epsilon_grid:
            noise = rng.normal(size=A.shape)
            noise /= np.maximum(np.linalg.norm(noise, axis=1, keepdims=True), 1e-300)
            noise *= 0.5 * eps * rng.uniform(0.0, 1.0, size=(size, 1))
            image = base + noise
            labels = np.zeros(size, dtype=np.int64)
            pair = EmbeddingPair(LabeledPointSet(dimension, A, labels),
                                 LabeledPointSet(dimension, image, labels))
            measured = nearisometry_defect(A, image)
            _, residual = align_isometry(pair)
            # round-off of the rigid motion alone is not a perturbation
            if eps == 0 or measured <= 1e-12:
                ratio = 0.0
            else:
                ratio = residual * q / measured
            table.append(CnTrial(k, float(eps), measured, residual, th, ratio))
    c_hat = max((row.ratio for row in table), default=0.0)
    return CnEstimate(dimension, q, trials, c_hat, table)
