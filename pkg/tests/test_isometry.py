import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import labeled_sets, point_arrays
from tripletlab.geometry import InvalidInputError, LabeledPointSet
from tripletlab.isometry import (
    EmbeddingPair,
    RigidIsometry,
    align_isometry,
    d_iso,
    estimate_cn,
    nearisometry_defect,
)


def pair_of(X, Y, labels=None):
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    labels = np.zeros(len(X), int) if labels is None else labels
    return EmbeddingPair(LabeledPointSet(X.shape[1], X, labels), LabeledPointSet(Y.shape[1], Y, labels))


def test_rigid_isometry_validates():
    with pytest.raises(InvalidInputError, match="orthogonal"):
        RigidIsometry([[1, 1], [0, 1]], [0, 0])
    U = RigidIsometry.identity(3)
    np.testing.assert_array_equal(U.apply(np.ones((2, 3))), np.ones((2, 3)))


def test_random_isometry_covers_reflections():
    dets = {round(RigidIsometry.random(3, np.random.default_rng(s)).determinant) for s in range(20)}
    assert dets == {-1, 1}


def test_pair_validation():
    a = LabeledPointSet(2, [[0, 0], [1, 0]], [0, 1])
    with pytest.raises(InvalidInputError, match="labels"):
        EmbeddingPair(a, LabeledPointSet(2, [[0, 0], [1, 0]], [1, 0]))
    with pytest.raises(InvalidInputError, match="counts"):
        EmbeddingPair(a, LabeledPointSet(2, [[0, 0]], [0]))
    with pytest.raises(InvalidInputError, match="dimensions"):
        EmbeddingPair(a, LabeledPointSet(1, [[0], [1]], [0, 1]))


def test_d_iso_examples():
    X = np.array([[0, 0], [1, 0], [0, 3]], float)
    assert d_iso(pair_of(X, X)) == 0.0
    assert d_iso(pair_of(X, 2 * X)) == pytest.approx(math.sqrt(10), abs=1e-12)
    U = RigidIsometry.random(2, np.random.default_rng(1))
    assert d_iso(pair_of(X, U.apply(X))) <= 1e-9


def test_nearisometry_defect_examples():
    A = np.array([[0.0, 0.0], [2.0, 0.0], [0.7, 1.9], [-1.1, 0.4]])
    assert nearisometry_defect(A, A) == 0.0
    assert nearisometry_defect(A, A + [3.0, -2.0]) <= 1e-12
    moved = A.copy()
    moved[1] += [1e-3, 0.0]  # along edge 0-1 of length 2
    assert nearisometry_defect(A, moved) == pytest.approx(1e-3, abs=1e-12)
    with pytest.raises(InvalidInputError, match="length mismatch"):
        nearisometry_defect(A, A[:3])


@settings(max_examples=1000)
@given(labeled_sets(min_points=2, dims=(2, 3)), st.integers(0, 2 ** 32 - 1))
def test_d_iso_rigid_invariance(ps, seed):
    rng = np.random.default_rng(seed)
    U = RigidIsometry.random(ps.dimension, rng)
    Y = ps.points + rng.normal(size=ps.points.shape)
    g = ps.with_points(Y)
    base = d_iso(EmbeddingPair(ps, g))
    moved = d_iso(EmbeddingPair(ps.with_points(U.apply(ps)), g))
    assert abs(base - moved) <= 1e-9 * max(1.0, np.abs(ps.points).max())
    assert base == pytest.approx(oracles.d_iso(ps.points, Y), abs=1e-12)


@settings(max_examples=1000)
@given(st.data())
def test_d_iso_pseudometric(data):
    n = data.draw(st.sampled_from([1, 2, 3]))
    N = data.draw(st.integers(2, 7))
    F, G, H = (data.draw(point_arrays(N, N, dims=(n,))) for _ in range(3))
    fg, gf = d_iso(pair_of(F, G)), d_iso(pair_of(G, F))
    assert fg == gf
    assert d_iso(pair_of(F, F)) == 0.0
    assert fg <= d_iso(pair_of(F, H)) + d_iso(pair_of(H, G)) + 1e-9


@settings(max_examples=1000)
@given(point_arrays(3, 8, dims=(1, 2, 3)), st.integers(0, 2 ** 32 - 1))
def test_alignment_recovers_rigid_motion(X, seed):
    U0 = RigidIsometry.random(X.shape[1], np.random.default_rng(seed))
    U, residual = align_isometry(pair_of(X, U0.apply(X)))
    assert residual <= 1e-9 * max(1.0, np.abs(X).max())
    assert abs(abs(U.determinant) - 1.0) < 1e-9


def test_alignment_identity(rng):
    X = rng.normal(size=(6, 3))
    U, residual = align_isometry(pair_of(X, X))
    np.testing.assert_allclose(U.Q, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(U.t, 0.0, atol=1e-12)
    assert residual <= 1e-12


def test_alignment_degenerate_input_prefers_identity():
    X = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float)
    U, residual = align_isometry(pair_of(X, X + [0, 1, 0]))
    assert residual <= 1e-12
    np.testing.assert_allclose(U.Q, np.eye(3), atol=1e-12)


def test_alignment_residual_grows_linearly(rng):
    X = rng.uniform(-1, 1, size=(10, 2))
    U0 = RigidIsometry.random(2, rng)
    slopes = []
    for eps in (1e-3, 1e-2, 1e-1):
        res = []
        for k in range(20):
            r = np.random.default_rng([7, k])
            noise = r.normal(size=X.shape)
            noise *= eps * r.uniform(size=(10, 1)) / np.linalg.norm(noise, axis=1, keepdims=True)
            res.append(align_isometry(pair_of(X, U0.apply(X) + noise))[1])
        slopes.append(np.mean(res) / eps)
    assert max(slopes) / min(slopes) <= 2.0


def test_cn_zero_perturbation():
    est = estimate_cn(2, trials=30, epsilon_grid=(0.0,), seed=1)
    assert est.c_hat == 0.0 and all(r == 0.0 for r in est.ratios)


def test_cn_two_points_on_line():
    est = estimate_cn(1, trials=40, epsilon_grid=(1e-3, 1e-2, 1e-1), q=1.0, points_per_set=2, seed=2)
    assert 0 < est.c_hat <= 1.0 + 1e-9


def test_cn_stable_across_seed_batches():
    a = estimate_cn(2, trials=100, seed=10).c_hat
    b = estimate_cn(2, trials=100, seed=11).c_hat
    assert np.isfinite(a) and np.isfinite(b)
    assert abs(a - b) <= 0.25 * max(a, b)


def test_cn_report_shape():
    d = estimate_cn(2, trials=30, seed=0).to_dict()
    assert set(d) >= {"n", "q", "trials", "c_hat", "ratios"}
    assert len(d["ratios"]) == 30 * 3
    assert d["c_hat"] == max(d["ratios"])


def test_cn_guards():
    with pytest.raises(InvalidInputError, match="30"):
        estimate_cn(2, trials=10)
    with pytest.raises(InvalidInputError, match="unreachable"):
        estimate_cn(2, trials=30, q=0.99, points_per_set=3, max_attempts=20)
