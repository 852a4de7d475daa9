"""Triplets, the triplet loss, mining strategies and the separation predicate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import InvalidInputError, LabeledPointSet, pairwise_distances


@dataclass(frozen=True)
class Triplet:
    anchor_index: int
    positive_index: int
    negative_index: int
    signed_loss: float

    @property
    def indices(self) -> tuple[int, int, int]:
        return (self.anchor_index, self.positive_index, self.negative_index)


@dataclass(frozen=True)
class HardNegative:
    """Global argmax of the signed loss over every valid triplet."""


@dataclass(frozen=True)
class SemiHard:
    """Hardest triplet whose negative lies beyond the positive."""


@dataclass(frozen=True)
class BatchHard:
    batch_size: int
    seed: int = 0


@dataclass(frozen=True)
class RandomTriplet:
    seed: int = 0


MiningStrategy = Union[HardNegative, SemiHard, BatchHard, RandomTriplet]


def _masks(labels):
    same = labels[:, None] == labels[None, :]
    other = ~same
    np.fill_diagonal(same, False)
    return same, other


def _anchor_blocks(D, labels, subset=None):
    """Yield ``(a, pos, neg, S)`` with ``S[i, j] = D[a, pos[i]] - D[a, neg[j]]``.

    Anchors, positives and negatives are visited in increasing index order,
    so flattening ``S`` row-major across anchors is lexicographic order.
    """
    idx = np.arange(len(labels)) if subset is None else np.asarray(subset)
    lab = labels[idx]
    for ia, a in enumerate(idx):
        pos = idx[(lab == lab[ia]) & (idx != a)]
        neg = idx[lab != lab[ia]]
        if pos.size == 0 or neg.size == 0:
            continue
        yield a, pos, neg, D[a, pos][:, None] - D[a, neg][None, :]


def enumerate_triplets(ps: LabeledPointSet) -> np.ndarray:
    """All valid ``(anchor, positive, negative)`` index triples, lexicographic."""
    D = pairwise_distances(ps)
    rows = []
    for a, pos, neg, _ in _anchor_blocks(D, ps.labels):
        P, Q = np.meshgrid(pos, neg, indexing="ij")
        rows.append(np.column_stack([np.full(P.size, a), P.ravel(), Q.ravel()]))
    if not rows:
        return np.empty((0, 3), dtype=np.int64)
    return np.vstack(rows).astype(np.int64)


def _check_triplet(ps, t):
    N = len(ps)
    a, p, n = t.indices
    if not all(0 <= i < N for i in (a, p, n)):
        raise InvalidInputError("invalid triplet")
    lab = ps.labels
    if a == p or lab[a] != lab[p] or lab[a] == lab[n]:
        raise InvalidInputError("invalid triplet")


def make_triplet(ps: LabeledPointSet, anchor: int, positive: int, negative: int) -> Triplet:
    """Build a :class:`Triplet` with its signed loss measured on ``ps``."""
    t = Triplet(int(anchor), int(positive), int(negative), 0.0)
    _check_triplet(ps, t)
    D = pairwise_distances(ps)
    s = float(D[anchor, positive] - D[anchor, negative])
    return Triplet(t.anchor_index, t.positive_index, t.negative_index, s)


def triplet_loss(ps: LabeledPointSet, t: Triplet, margin: float = 0.0) -> float:
    """Hinged triplet loss ``max(0, d(a, p) - d(a, n) + margin)``."""
    if margin < 0:
        raise InvalidInputError("margin must be nonnegative")
    _check_triplet(ps, t)
    D = pairwise_distances(ps)
    a, p, n = t.indices
    return max(0.0, float(D[a, p] - D[a, n]) + margin)


def _argmax_triplet(D, labels, subset=None, accept=None):
    best = None
    for a, pos, neg, S in _anchor_blocks(D, labels, subset):
        if accept is not None:
            S = np.where(accept(D[a, pos][:, None], D[a, neg][None, :]), S, -np.inf)
        k = int(np.argmax(S))
        v = S.flat[k]
        if v == -np.inf:
            continue
        if best is None or v > best[3]:
            i, j = divmod(k, S.shape[1])
            best = (int(a), int(pos[i]), int(neg[j]), float(v))
    return best


def separation_margin(ps: LabeledPointSet) -> float:
    """Largest signed loss ``d(a, p) - d(a, n)`` over all valid triplets."""
    best = _argmax_triplet(pairwise_distances(ps), ps.labels)
    if best is None:
        raise InvalidInputError("no valid triplets")
    return best[3]


def hnm_loss(ps: LabeledPointSet) -> float:
    """Triplet loss under hard negative mining with zero margin."""
    return max(0.0, separation_margin(ps))


def has_valid_triplets(ps: LabeledPointSet) -> bool:
    same, other = _masks(ps.labels)
    return bool(np.any(same.any(axis=1) & other.any(axis=1)))


def mine(ps: LabeledPointSet, strategy: MiningStrategy, margin: float = 0.0) -> Triplet:
    """Select one triplet according to ``strategy``.

    Ties go to the lexicographically smallest ``(anchor, positive, negative)``.
    """
    D = pairwise_distances(ps)
    lab = ps.labels
    if isinstance(strategy, HardNegative):
        best = _argmax_triplet(D, lab)
    elif isinstance(strategy, SemiHard):
        if margin > 0:
            def accept(dp, dn):
                return (dn > dp) & (dn < dp + margin)
        else:
            def accept(dp, dn):
                return dn > dp
        best = _argmax_triplet(D, lab, accept=accept)
    elif isinstance(strategy, BatchHard):
        N = len(ps)
        if not 3 <= strategy.batch_size <= N:
            raise InvalidInputError(f"batch_size must lie in [3, {N}]")
        rng = np.random.default_rng(strategy.seed)
        batch = np.sort(rng.choice(N, size=strategy.batch_size, replace=False))
        best = _argmax_triplet(D, lab, subset=batch)
    elif isinstance(strategy, RandomTriplet):
        T = enumerate_triplets(ps)
        if T.shape[0] == 0:
            raise InvalidInputError("no candidate triplet")
        a, p, n = T[np.random.default_rng(strategy.seed).integers(T.shape[0])]
        best = (int(a), int(p), int(n), float(D[a, p] - D[a, n]))
    else:
        raise InvalidInputError(f"unknown mining strategy {strategy!r}")
    if best is None:
        raise InvalidInputError("no candidate triplet")
    return Triplet(*best)


def is_triplet_separated(ps: LabeledPointSet) -> bool:
    """Whether ``||x - y|| <= ||x - z||`` for all x, y in one class and z outside it."""
    D = pairwise_distances(ps)
    same = ps.labels[:, None] == ps.labels[None, :]
    far = np.where(same, D, -np.inf).max(axis=1)
    near = np.where(same, np.inf, D).min(axis=1)
    return bool(np.all(far <= near))


def class_radii(ps: LabeledPointSet, class_id) -> tuple[np.ndarray, np.ndarray]:
    """Centers and radii of the exclusion disks of one class.

    A point of another class violates separation against ``class_id`` iff it
    lies strictly inside one of these balls.
    """
    P = ps.class_points(class_id)
    if P.shape[0] == 0:
        raise InvalidInputError(f"class {class_id} is empty")
    return P, pairwise_distances(P).max(axis=1)


def violates_class(ps: LabeledPointSet, class_id, z) -> bool:
    centers, radii = class_radii(ps, class_id)
    d = np.linalg.norm(centers - np.asarray(z, dtype=float), axis=1)
    return bool(np.any(d < radii))


def class_boundary(ps: LabeledPointSet, class_id, angular_samples: int = 360) -> np.ndarray:
    """Sampled boundary of the union of a class's exclusion disks.

    Every disk contains the whole class, hence its centroid, so the union is
    star-shaped about the centroid and one boundary point per ray suffices.
    Returns an ``(angular_samples + 1, 2)`` closed polyline.
    """
    if ps.dimension != 2:
        raise InvalidInputError("2D only")
    if angular_samples < 3:
        raise InvalidInputError("angular_samples must be at least 3")
    centers, radii = class_radii(ps, class_id)
    c = centers.mean(axis=0)
    phi = 2 * math.pi * np.arange(angular_samples) / angular_samples
    U = np.column_stack([np.cos(phi), np.sin(phi)])
    rel = centers - c
    proj = U @ rel.T
    disc = proj ** 2 + radii[None, :] ** 2 - np.sum(rel ** 2, axis=1)[None, :]
    exit_ = proj + np.sqrt(np.maximum(disc, 0.0))
    R = np.maximum(exit_.max(axis=1), 0.0)
    poly = c + R[:, None] * U
    return np.vstack([poly, poly[:1]])
