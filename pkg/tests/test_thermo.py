import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermoengines.core import InvalidParameter, InverseTemperaturePair
from thermoengines.thermo import (
    beta_ordering, cone_extreme_channel, cone_extremes_batch, future_cone_extremes, lorenz_curve,
    lorenz_values, slto_swap_pair, thermo_majorizes, two_level_swap,
)

from oracles import lp_cone_max, lp_majorizes


def simplex(d, min_value=0.0):
    return st.lists(st.floats(min_value=min_value + 1e-3, max_value=1.0), min_size=d, max_size=d).map(
        lambda v: np.asarray(v) / np.sum(v))


def test_lorenz_curve_of_gibbs_is_diagonal():
    g = np.array([0.4, 0.3, 0.2, 0.1])
    L = lorenz_curve(g, g)
    assert L.breakpoints == [(0.0, 0.0), (1.0, 1.0)]


def test_lorenz_breakpoints_sharp_state():
    g = np.array([0.75, 0.25])
    L = lorenz_curve([0.0, 1.0], g)
    assert np.allclose(L.x, [0, 0.25, 1]) and np.allclose(L.y, [0, 1, 1])
    assert beta_ordering([0.0, 1.0], g).perm.tolist() == [1, 0]


@given(simplex(4), simplex(4, 0.05))
@settings(max_examples=30)
def test_lorenz_values_match_curve(p, g):
    xs = np.linspace(0, 1, 17)
    assert np.allclose(lorenz_values(p, g, xs)[0], lorenz_curve(p, g)(xs), atol=1e-12)


@given(simplex(4), simplex(4), simplex(4, 0.05))
@settings(max_examples=25)
def test_thermomajorization_matches_lp(p, q, g):
    # compare away from the boundary where the LP and the curve test both wobble
    lp = lp_majorizes(p, q, g)
    xs = np.union1d(lorenz_curve(p, g).x, lorenz_curve(q, g).x)
    margin = np.min(lorenz_values(p, g, xs)[0] - lorenz_values(q, g, xs)[0])
    if abs(margin) > 1e-7:
        assert thermo_majorizes(p, q, g) == lp


@given(simplex(4), simplex(4, 0.05), st.integers(0, 2**31 - 1))
@settings(max_examples=25)
def test_cone_extremes_attain_lp_optimum(p, g, seed):
    c = np.random.default_rng(seed).standard_normal(4)
    E = future_cone_extremes(p, g)
    assert np.max(E @ c) == pytest.approx(lp_cone_max(p, g, c), abs=1e-8)
    for q in E:
        assert thermo_majorizes(p, q, g, tol=1e-10)


def test_cone_extremes_batch_shape_and_normalization(rng):
    g = np.array([0.5, 0.3, 0.2])
    P = rng.dirichlet(np.ones(3), size=5)
    Q = cone_extremes_batch(P, g)
    assert Q.shape == (5, 6, 3)
    assert np.allclose(Q.sum(axis=2), 1.0)


@given(simplex(4), simplex(4, 0.05))
@settings(max_examples=30)
def test_cone_extreme_channel_is_exact(p, g):
    Q = cone_extremes_batch(p[None, :], g)[0]
    for k, perm in enumerate(itertools.permutations(range(4))):
        ch = cone_extreme_channel(p, g, perm)
        assert np.allclose(ch.matrix @ p, Q[k], atol=1e-12)
        assert np.allclose(ch.matrix @ g, g, atol=1e-12)


def test_two_level_swap_matrix():
    g = np.array([0.6, 0.4])
    m = two_level_swap(0, 1, g).matrix
    assert np.allclose(m, [[1 / 3, 1], [2 / 3, 0]])
    assert np.allclose(np.sort(np.linalg.eigvals(m)), [-2 / 3, 1])
    with pytest.raises(InvalidParameter):
        two_level_swap(1, 1, g)


def test_slto_swap_pair_block():
    b = InverseTemperaturePair(2.0, 1.0)
    m = slto_swap_pair(b, 1.0, 3).matrix
    g6 = np.exp(-6.0)
    assert np.allclose(m, [[g6, 0], [1 - g6, 1]])
    with pytest.raises(InvalidParameter):
        slto_swap_pair(b, 0.0)
