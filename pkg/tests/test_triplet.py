import math

import numpy as np
import pytest
from hypothesis import given, settings

import oracles
from conftest import labeled_sets
from tripletlab.geometry import InvalidInputError, LabeledPointSet
from tripletlab.triplet import (
    BatchHard,
    HardNegative,
    RandomTriplet,
    SemiHard,
    Triplet,
    class_boundary,
    class_radii,
    enumerate_triplets,
    has_valid_triplets,
    hnm_loss,
    is_triplet_separated,
    make_triplet,
    mine,
    separation_margin,
    triplet_loss,
    violates_class,
)

HARD = 1 - math.sqrt(0.41)


def test_triplet_loss_examples():
    ps = LabeledPointSet(2, [[0, 0], [1, 0], [5, 0]], [0, 0, 1])
    assert triplet_loss(ps, make_triplet(ps, 0, 1, 2)) == 0.0
    ps = LabeledPointSet(2, [[0, 0], [1, 0], [0.5, 0.4]], [0, 0, 1])
    assert triplet_loss(ps, make_triplet(ps, 0, 1, 2)) == pytest.approx(HARD, abs=1e-12)
    ps = LabeledPointSet(2, [[0, 0], [1, 0], [1, 0]], [0, 0, 1])
    assert triplet_loss(ps, make_triplet(ps, 0, 1, 2)) == 0.0


def test_triplet_loss_margin(ab):
    t = make_triplet(ab, 0, 1, 2)
    assert triplet_loss(ab, t, margin=0.25) == pytest.approx(HARD + 0.25)
    with pytest.raises(InvalidInputError):
        triplet_loss(ab, t, margin=-1)


@pytest.mark.parametrize("idx", [(0, 0, 2), (0, 2, 1), (0, 1, 1), (0, 1, 7)])
def test_invalid_triplets(ab, idx):
    with pytest.raises(InvalidInputError, match="invalid triplet"):
        triplet_loss(ab, Triplet(*idx, 0.0))


def test_signed_loss_recorded(ab):
    t = make_triplet(ab, 1, 0, 2)
    assert t.signed_loss == pytest.approx(HARD)
    assert t.indices == (1, 0, 2)


def test_separation_margin_examples(ab):
    with pytest.raises(InvalidInputError, match="no valid triplets"):
        separation_margin(LabeledPointSet(2, [[0, 0], [10, 0]], [0, 1]))
    assert separation_margin(ab) == pytest.approx(HARD, abs=1e-12)
    far = LabeledPointSet(2, [[0, 0], [1, 0], [10, 0], [11, 0]], [0, 0, 1, 1])
    assert separation_margin(far) == -8.0


def test_hnm_loss_examples(ab):
    far = LabeledPointSet(2, [[0, 0], [1, 0], [10, 0], [11, 0]], [0, 0, 1, 1])
    assert hnm_loss(far) == 0.0
    assert hnm_loss(ab) == pytest.approx(HARD, abs=1e-12)
    same = LabeledPointSet(2, np.ones((4, 2)), [0, 0, 1, 1])
    assert hnm_loss(same) == 0.0


def test_mining_examples(ab):
    t = mine(ab, HardNegative())
    assert t.indices == (0, 1, 2)  # tie with (1, 0, 2) broken lexicographically
    r1, r2 = mine(ab, RandomTriplet(seed=3)), mine(ab, RandomTriplet(seed=3))
    assert r1 == r2
    assert mine(ab, BatchHard(3)) == t
    with pytest.raises(InvalidInputError):
        mine(ab, BatchHard(2))


def test_semi_hard_needs_farther_negative(ab):
    # the only triplets have d(a, n) < d(a, p)
    with pytest.raises(InvalidInputError, match="no candidate"):
        mine(ab, SemiHard())
    ps = LabeledPointSet(1, [[0], [1], [1.5], [3]], [0, 0, 1, 1])
    t = mine(ps, SemiHard())
    ref = oracles.hardest(ps.points, ps.labels, accept=lambda dp, dn: dn > dp)
    assert t.indices == ref[:3]
    t = mine(ps, SemiHard(), margin=0.75)
    ref = oracles.hardest(ps.points, ps.labels, accept=lambda dp, dn: dp < dn < dp + 0.75)
    assert t.indices == ref[:3]


def test_separated_examples(ab):
    assert is_triplet_separated(LabeledPointSet(2, [[0, 0], [10, 0]], [0, 1]))
    assert not is_triplet_separated(ab)
    assert is_triplet_separated(LabeledPointSet(2, [[0, 0], [3, 1], [2, 2]], [4, 4, 4]))


def test_enumeration_order(rng):
    X = rng.normal(size=(7, 2))
    lab = [0, 1, 0, 2, 1, 0, 2]
    ps = LabeledPointSet(2, X, lab)
    T = enumerate_triplets(ps)
    ref = [t[:3] for t in oracles.all_triplets(X, lab)]
    assert [tuple(r) for r in T.tolist()] == ref


@settings(max_examples=1000)
@given(labeled_sets())
def test_mining_matches_enumeration(ps):
    ref = oracles.hardest(ps.points, ps.labels)
    if ref is None:
        assert not has_valid_triplets(ps)
        with pytest.raises(InvalidInputError):
            separation_margin(ps)
        return
    t = mine(ps, HardNegative())
    assert t.indices == ref[:3]
    assert t.signed_loss == ref[3]
    assert separation_margin(ps) == ref[3]
    assert mine(ps, BatchHard(len(ps))) == t


@settings(max_examples=1000)
@given(labeled_sets())
def test_separated_matches_definition(ps):
    assert is_triplet_separated(ps) == oracles.separated(ps.points, ps.labels)
    if has_valid_triplets(ps):
        assert (hnm_loss(ps) == 0.0) == is_triplet_separated(ps)


@settings(max_examples=200)
@given(labeled_sets(min_points=4))
def test_batch_hard_is_hardest_in_batch(ps):
    N = len(ps)
    for seed in range(3):
        strat = BatchHard(3 + seed % (N - 2), seed)
        rng = np.random.default_rng(seed)
        batch = np.sort(rng.choice(N, size=strat.batch_size, replace=False))
        sub = [(a, p, n, s) for a, p, n, s in oracles.all_triplets(ps.points, ps.labels)
               if a in batch and p in batch and n in batch]
        if not sub:
            with pytest.raises(InvalidInputError):
                mine(ps, strat)
            continue
        best = max(sub, key=lambda r: r[3])
        best = min((r for r in sub if r[3] == best[3]), key=lambda r: r[:3])
        assert mine(ps, strat).indices == best[:3]


# ---------------------------------------------------------------- boundary

def test_boundary_of_singleton():
    ps = LabeledPointSet(2, [[2, 3], [0, 0], [1, 0]], [5, 0, 0])
    poly = class_boundary(ps, 5, 16)
    assert poly.shape == (17, 2)
    np.testing.assert_allclose(poly, np.tile([2.0, 3.0], (17, 1)))


def test_boundary_two_unit_disks():
    ps = LabeledPointSet(2, [[0, 0], [1, 0], [5, 5]], [0, 0, 1])
    poly = class_boundary(ps, 0, 720)
    assert np.array_equal(poly[0], poly[-1])
    # each vertex lies on one circle and outside the other open disk
    d = np.linalg.norm(poly[:, None, :] - np.array([[0, 0], [1, 0]])[None], axis=-1)
    assert np.all(d.max(axis=1) >= 1.0 - 1e-9)
    assert np.all(np.abs(d - 1.0).min(axis=1) < 1e-9)
    # membership by direct disk test agrees with violates_class on a grid
    g = np.linspace(-1.5, 2.5, 41)
    for x in g:
        for y in g:
            inside = math.hypot(x, y) < 1 or math.hypot(x - 1, y) < 1
            assert violates_class(ps, 0, (x, y)) == inside


def test_boundary_2d_only():
    ps = LabeledPointSet(3, np.eye(3), [0, 0, 1])
    with pytest.raises(InvalidInputError, match="2D only"):
        class_boundary(ps, 0)


@settings(max_examples=300)
@given(labeled_sets(dims=(2,), max_classes=2))
def test_negatives_outside_boundary_iff_zero_loss(ps):
    for c in ps.classes:
        others = ps.points[ps.labels != c]
        centers, radii = class_radii(ps, c)
        if others.size == 0 or centers.shape[0] < 2:
            continue
        outside = not any(violates_class(ps, c, z) for z in others)
        # hard-negative loss restricted to anchors of class c
        worst = max(s for a, p, n, s in oracles.all_triplets(ps.points, ps.labels)
                    if ps.labels[a] == c)
        assert outside == (worst <= 0)
