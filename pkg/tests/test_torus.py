import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusmfg import TorusPoint, displacement, torus_distance, wrap
from torusmfg._core import reference


def test_wraparound_beats_direct():
    assert torus_distance(np.array([0.1]), np.array([0.9])) == pytest.approx(0.2)


def test_identity_is_zero():
    x = np.array([0.37, 0.81])
    assert torus_distance(x, x) == 0.0


def test_two_dim_separates():
    x = np.array([0.9, 0.2])
    y = np.array([0.1, 0.1])
    assert torus_distance(x, y) == pytest.approx(np.sqrt(0.2**2 + 0.1**2), abs=1e-15)


def test_wrap_is_total_and_half_open():
    pts = np.array([-1e-17, -0.25, 1.0, 2.75, -3.5, 0.999999999])
    w = wrap(pts)
    assert np.all(w >= 0.0) and np.all(w < 1.0)


@settings(max_examples=200, deadline=None, derandomize=True)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=3),
       st.lists(st.floats(-5, 5), min_size=1, max_size=3),
       st.lists(st.floats(-5, 5), min_size=1, max_size=3))
def test_metric_axioms(xs, ys, zs):
    d = min(len(xs), len(ys), len(zs))
    x, y, z = np.array(xs[:d]), np.array(ys[:d]), np.array(zs[:d])
    dxy = torus_distance(x, y)
    assert dxy == pytest.approx(torus_distance(y, x), abs=1e-12)
    assert dxy <= torus_distance(x, z) + torus_distance(z, y) + 1e-12
    assert dxy <= np.sqrt(d) / 2 + 1e-12


def test_displacement_minimal():
    d = displacement(np.array([0.9]), np.array([0.1]))
    assert d == pytest.approx(0.2)
    d = displacement(np.array([0.1]), np.array([0.9]))
    assert d == pytest.approx(-0.2)


def test_torus_point_add_wraps():
    p = TorusPoint([0.8, 0.9]) + np.array([0.3, 0.3])
    assert np.allclose(p.coords, [0.1, 0.2])


def test_pairwise_matches_scalar(rng):
    X = rng.random((6, 2))
    Y = rng.random((4, 2))
    C = reference.pairwise_sq_torus_dist(X, Y)
    for i in range(6):
        for j in range(4):
            assert C[i, j] == pytest.approx(torus_distance(X[i], Y[j]) ** 2, abs=1e-14)


def test_backends_agree(rng):
    import torusmfg._core as core

    X = rng.random((13, 3))
    Y = rng.random((9, 3))
    assert np.allclose(core.pairwise_sq_torus_dist(X, Y),
                       reference.pairwise_sq_torus_dist(X, Y), atol=1e-15)


@settings(max_examples=200, deadline=None, derandomize=True)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=3),
       st.lists(st.floats(-3, 3), min_size=1, max_size=3))
def test_displacement_reaches_target(xs, ys):
    d = min(len(xs), len(ys))
    x, y = np.array(xs[:d]), np.array(ys[:d])
    disp = displacement(x, y)
    assert np.all(np.abs(disp) <= 0.5)
    # compare on the torus, not between canonical representatives (seam!)
    assert torus_distance(wrap(x) + disp, y) <= 1e-12
    assert np.linalg.norm(disp) == pytest.approx(torus_distance(x, y), abs=1e-12)
