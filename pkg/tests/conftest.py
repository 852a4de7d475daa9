import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

coord = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def point_arrays(draw, min_points=1, max_points=8, dims=(1, 2, 3)):
    n = draw(st.sampled_from(dims))
    N = draw(st.integers(min_points, max_points))
    return np.array(draw(st.lists(st.lists(coord, min_size=n, max_size=n),
                                  min_size=N, max_size=N)), dtype=float)


@st.composite
def labeled_sets(draw, min_points=3, max_points=8, dims=(1, 2, 3), max_classes=3):
    from tripletlab import LabeledPointSet

    X = draw(point_arrays(min_points, max_points, dims))
    labels = draw(st.lists(st.integers(0, max_classes - 1), min_size=len(X), max_size=len(X)))
    return LabeledPointSet(X.shape[1], X, labels)


@pytest.fixture
def ab():
    """Class A {(0,0),(1,0)}, class B {(0.5,0.4)}: not Triplet-Separated."""
    from tripletlab import LabeledPointSet

    return LabeledPointSet(2, [[0, 0], [1, 0], [0.5, 0.4]], [0, 0, 1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
