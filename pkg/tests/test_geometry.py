import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist, directed_hausdorff

import oracles
from conftest import point_arrays
from tripletlab import geometry
from tripletlab.geometry import (
    InvalidInputError,
    LabeledPointSet,
    diameter,
    hausdorff_distance,
    pairwise_distances,
    project_direction,
    thickness,
    unit_vector,
)
from tripletlab.isometry import RigidIsometry

GOOD = {"dimension": 2, "points": [[0, 0], [1, 0], [0.5, 0.4]], "labels": [0, 0, 1]}


# ------------------------------------------------------------------ schema

def test_round_trip(tmp_path):
    ps = LabeledPointSet.from_dict(GOOD)
    path = tmp_path / "ps.json"
    geometry.dump(ps, path)
    back = geometry.load(path)
    np.testing.assert_array_equal(back.points, ps.points)
    np.testing.assert_array_equal(back.labels, ps.labels)
    assert back.to_dict() == ps.to_dict()


@pytest.mark.parametrize("patch, where", [
    ({"dimension": 0}, "dimension"),
    ({"dimension": True}, "dimension"),
    ({"points": [[0, 0], [1], [0.5, 0.4]]}, "points[1]"),
    ({"points": [[0, 0], [1, "x"], [0.5, 0.4]]}, "points[1][1]"),
    ({"labels": [0, 0]}, "labels"),
    ({"labels": [0, 0.5, 1]}, "labels[1]"),
    ({"extra": 1}, "extra"),
])
def test_schema_errors_name_the_field(patch, where):
    data = dict(GOOD, **patch)
    with pytest.raises(InvalidInputError, match=r"field '" + where.replace("[", r"\[").replace("]", r"\]")):
        LabeledPointSet.from_dict(data)


def test_missing_field():
    with pytest.raises(InvalidInputError, match="labels"):
        LabeledPointSet.from_dict({"dimension": 2, "points": [[0, 0]]})


def test_syntax_error_reports_line():
    text = '{\n  "dimension": 2,\n  "points": [[0, 0],,]\n}'
    with pytest.raises(InvalidInputError, match="line 3"):
        geometry.loads(text)


def test_non_finite_rejected():
    with pytest.raises(InvalidInputError):
        LabeledPointSet(2, [[0, np.nan]], [0])
    with pytest.raises(InvalidInputError, match="finite"):
        geometry.loads('{"dimension": 1, "points": [[Infinity]], "labels": [0]}')


def test_arrays_are_read_only():
    ps = LabeledPointSet.from_dict(GOOD)
    with pytest.raises(ValueError):
        ps.points[0, 0] = 5.0


def test_load_does_not_modify_file(tmp_path):
    path = tmp_path / "in.json"
    path.write_text(json.dumps(GOOD))
    before = path.read_bytes()
    geometry.load(path)
    assert path.read_bytes() == before


def test_missing_file():
    with pytest.raises(InvalidInputError, match="No such file"):
        geometry.load("/nonexistent/ps.json")


# --------------------------------------------------------------- distances

def test_three_four_five():
    D = pairwise_distances([[0, 0], [3, 4]])
    assert D[0, 1] == 5.0 and D[1, 0] == 5.0
    assert np.all(np.diag(D) == 0)


def test_distances_match_per_entry_norms(rng):
    X = rng.normal(size=(6, 3))
    D = pairwise_distances(X)
    for i in range(6):
        for j in range(6):
            assert D[i, j] == pytest.approx(oracles.dist(X[i], X[j]), abs=1e-14)
    np.testing.assert_allclose(D, cdist(X, X), atol=1e-13)


def test_diameter():
    assert diameter([[0, 0], [1, 0], [0, 1], [1, 1]]) == pytest.approx(math.sqrt(2))
    assert diameter([[3.0, 1.0]]) == 0.0
    with pytest.raises(InvalidInputError, match="empty"):
        diameter(np.zeros((0, 2)))


def test_diameter_is_max_pair(rng):
    X = rng.normal(size=(10, 2))
    best = max(oracles.dist(p, q) for p in X for q in X)
    assert diameter(X) == pytest.approx(best, abs=1e-14)


def test_project_direction():
    P = [[2, 5], [-1, 3]]
    np.testing.assert_array_equal(project_direction(P, [1, 0]), [2, -1])
    np.testing.assert_array_equal(project_direction(P, [0, 1]), [5, 3])
    with pytest.raises(InvalidInputError, match="dimension mismatch"):
        project_direction(P, [1, 0, 0])
    with pytest.raises(InvalidInputError, match="unit"):
        project_direction(P, [2, 0])


def test_project_direction_per_entry(rng):
    X = rng.normal(size=(7, 3))
    e = unit_vector(rng.normal(size=3))
    got = project_direction(X, e)
    for k in range(7):
        assert got[k] == pytest.approx(sum(float(a) * float(b) for a, b in zip(X[k], e)), abs=1e-13)


def test_unit_vector_zero():
    with pytest.raises(InvalidInputError):
        unit_vector([0, 0])


# --------------------------------------------------------------- thickness

def test_thickness_collinear():
    assert thickness([[0, 0], [1, 0], [2, 0]]) == pytest.approx(0.0, abs=1e-9)


def test_thickness_unit_square():
    sq = [[0, 0], [1, 0], [0, 1], [1, 1]]
    assert abs(thickness(sq) - 1.0) <= 1e-3
    assert thickness(sq) == pytest.approx(oracles.sweep_thickness(sq), abs=1e-9)


def test_thickness_equilateral():
    tri = [[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]]
    assert thickness(tri) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)


def test_thickness_cube():
    cube = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float)
    assert thickness(cube) == pytest.approx(1.0, abs=1e-9)


def test_thickness_sampled_regime_is_close(rng):
    # 30 points in R^4 exceed the normal budget, so candidates are sampled
    X = rng.normal(size=(30, 4))
    U = RigidIsometry.random(4, rng)
    a, b = thickness(X), thickness(U.apply(X))
    assert abs(a - b) <= 1e-3 * diameter(X)


def test_thickness_scales(rng):
    X = rng.normal(size=(9, 2))
    assert thickness(3.5 * X) == pytest.approx(3.5 * thickness(X), rel=1e-6)


def test_thickness_resolution_guard():
    with pytest.raises(InvalidInputError, match="insufficient resolution"):
        thickness([[0, 0], [1, 1]], angular_resolution=4)


def test_thickness_matches_exact_width(rng):
    for _ in range(20):
        X = rng.normal(size=(int(rng.integers(3, 12)), 2))
        th = thickness(X)
        # attained by an evaluated direction, so never below the exact width
        assert th >= oracles.exact_width_2d(X) - 1e-12
        assert th == pytest.approx(oracles.exact_width_2d(X), abs=1e-9 * diameter(X))
        assert th <= oracles.sweep_thickness(X) + 1e-12


@settings(max_examples=1000)
@given(point_arrays(min_points=2, max_points=8, dims=(2,)), st.integers(0, 2 ** 32 - 1))
def test_thickness_rigid_invariance_2d(X, seed):
    U = RigidIsometry.random(2, np.random.default_rng(seed))
    a, b = thickness(X), thickness(U.apply(X))
    assert abs(a - b) <= 1e-9 * max(1.0, diameter(X))


@settings(max_examples=1000)
@given(point_arrays(min_points=4, max_points=8, dims=(3,)), st.integers(0, 2 ** 32 - 1))
def test_thickness_rigid_invariance_nd(X, seed):
    U = RigidIsometry.random(3, np.random.default_rng(seed))
    a, b = thickness(X), thickness(U.apply(X))
    # small sets enumerate every candidate normal, so agreement is to round-off
    assert abs(a - b) <= 1e-9 * max(1.0, diameter(X))


@settings(max_examples=1000)
@given(point_arrays(min_points=1, max_points=8, dims=(1, 2, 3)))
def test_thickness_bounded_by_diameter(X):
    assert -1e-12 <= thickness(X) <= diameter(X) + 1e-9


# ----------------------------------------------------------- hausdorff

def test_hausdorff_examples():
    assert hausdorff_distance([[0, 0]], [[3, 0]]) == 3.0
    assert hausdorff_distance([[0], [1]], [[0], [2]]) == 1.0
    A = [[0, 1], [2, 3]]
    assert hausdorff_distance(A, A) == 0.0


def test_hausdorff_errors():
    with pytest.raises(InvalidInputError, match="dimension mismatch"):
        hausdorff_distance([[0, 0]], [[0, 0, 0]])


@settings(max_examples=1000)
@given(st.data())
def test_hausdorff_metric_axioms(data):
    n = data.draw(st.sampled_from([1, 2, 3]))
    A, B, C = (data.draw(point_arrays(1, 6, dims=(n,))) for _ in range(3))
    dAB, dBA = hausdorff_distance(A, B), hausdorff_distance(B, A)
    assert dAB == dBA
    assert dAB >= 0
    assert hausdorff_distance(A, A) == 0.0
    assert dAB <= hausdorff_distance(A, C) + hausdorff_distance(C, B) + 1e-9
    ref = max(directed_hausdorff(A, B)[0], directed_hausdorff(B, A)[0])
    assert dAB == pytest.approx(ref, abs=1e-9)
    assert dAB == pytest.approx(oracles.hausdorff(A, B), abs=1e-12)


@settings(max_examples=1000)
@given(point_arrays(1, 8))
def test_pairwise_metric_axioms(X):
    D = pairwise_distances(X)
    assert np.all(np.diag(D) == 0)
    assert np.array_equal(D, D.T)
    assert np.all(D >= 0)
    N = len(X)
    tri = D[:, None, :] <= D[:, :, None] + D[None, :, :].transpose(1, 0, 2) + 1e-9
    assert tri.all() or N == 0


@settings(max_examples=1000)
@given(point_arrays(2, 8, dims=(2, 3)), st.integers(0, 2 ** 32 - 1))
def test_distances_rigid_invariance(X, seed):
    U = RigidIsometry.random(X.shape[1], np.random.default_rng(seed))
    D0, D1 = pairwise_distances(X), pairwise_distances(U.apply(X))
    assert np.abs(D0 - D1).max() <= 1e-9 * max(1.0, np.abs(X).max())
    A, B = X[: len(X) // 2 or 1], X[len(X) // 2:]
    h0 = hausdorff_distance(A, B)
    h1 = hausdorff_distance(U.apply(A), U.apply(B))
    assert abs(h0 - h1) <= 1e-9 * max(1.0, np.abs(X).max())
