import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermoengines.core import DimensionMismatch, InvalidParameter, qubit_context
from thermoengines.engines import extremal_strokes
from thermoengines.metrics import (
    ENTANGLEMENT_GAP, MetricKind, UndefinedAdvantage, engine_efficiency, entanglement_threshold,
    evaluate, excited_pop, free_advantage, ground_pop, max_negativity, reference_state,
    relative_advantage, slto_faithful_m, slto_monotone_m0,
)
from thermoengines.thermo import cone_extremes_batch

from oracles import numeric_max_negativity

simplex4 = st.lists(st.floats(min_value=1e-3, max_value=1.0), min_size=4, max_size=4).map(
    lambda v: np.asarray(v) / np.sum(v))


def test_negativity_reference_value():
    assert max_negativity([0, 0.75, 0.25, 0]) == pytest.approx(0.25, abs=1e-15)
    assert numeric_max_negativity(np.array([0, 0.75, 0.25, 0])) == pytest.approx(0.25, abs=1e-8)
    assert max_negativity([0.25] * 4) == 0.0
    with pytest.raises(DimensionMismatch):
        max_negativity([0.5, 0.5])


@given(simplex4)
@settings(max_examples=15)
def test_negativity_matches_unitary_optimization(p):
    assert max_negativity(p) == pytest.approx(numeric_max_negativity(p), abs=1e-7)


def test_threshold_constant():
    assert ENTANGLEMENT_GAP == pytest.approx(math.log(3 + 2 * math.sqrt(2)))
    assert math.exp(-ENTANGLEMENT_GAP) == pytest.approx(3 - 2 * math.sqrt(2))


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_threshold_agrees_with_negativity(xc, xh):
    ctx = qubit_context(xc, xh)
    gap = abs(ctx.betas.beta_c - ctx.betas.beta_h)
    if abs(gap - ENTANGLEMENT_GAP) < 1e-9:
        return
    assert (max_negativity(ctx.product_weights) > 0) == entanglement_threshold(ctx) == (gap > ENTANGLEMENT_GAP)


def test_metric_parsing_and_evaluate():
    assert MetricKind.parse("P_G") is MetricKind.GROUND_POP
    assert MetricKind.parse("nmax") is MetricKind.MAX_NEGATIVITY
    with pytest.raises(InvalidParameter):
        MetricKind.parse("bogus")
    p = np.array([0.4, 0.3, 0.2, 0.1])
    assert evaluate("pg", p) == ground_pop(p) == 0.4
    assert evaluate("pe", p) == excited_pop(p) == 0.1
    with pytest.raises(InvalidParameter):
        evaluate("m0", p)
    ctx = qubit_context(0.2, 0.6)
    assert evaluate("m0", p, ctx) == slto_monotone_m0(p, ctx)


def test_slto_faithful_vanishes_on_free_product():
    ctx = qubit_context(math.exp(-2), math.exp(-1))
    assert slto_faithful_m(ctx.product_weights, ctx) == 0.0
    sharp = np.array([0, 0, 0, 1.0])
    assert slto_faithful_m(sharp, ctx) == pytest.approx(1 - math.exp(-1))


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), simplex4, st.integers(0, 2**31 - 1))
@settings(max_examples=25)
def test_m0_never_increases_under_semilocal_strokes(xc, xh, p, seed):
    ctx = qubit_context(xc, xh)
    rng = np.random.default_rng(seed)
    strokes = [ctx.weights(("c", "h")), ctx.weights(("h", "c"))]
    m = slto_monotone_m0(p, ctx)
    for k in range(20):
        E = cone_extremes_batch(p[None, :], strokes[k % 2])[0]
        w = rng.dirichlet(np.ones(len(E)))
        p = w @ E
        m_new = slto_monotone_m0(p, ctx)
        assert m_new <= m + 1e-12
        m = m_new


def test_reference_states_and_advantages():
    ctx = qubit_context(0.2, 0.6)
    assert np.allclose(reference_state("pg", ctx), ctx.weights(("c", "c")))
    assert np.allclose(reference_state("pe", ctx), ctx.weights(("h", "h")))
    with pytest.raises(UndefinedAdvantage):
        reference_state("nmax", ctx)
    s = np.array([0.9, 0.05, 0.05, 0.0])
    f = ground_pop(ctx.weights(("c", "c")))
    assert free_advantage(s, "pg", f) == pytest.approx((0.9 - f) / f)
    with pytest.raises(UndefinedAdvantage):
        free_advantage(s, "nmax", 0.5)
    with pytest.raises(UndefinedAdvantage):
        free_advantage(s, "pe", 0.0)
    assert relative_advantage(s, "pg", 0.99) == pytest.approx(0.09 / 0.9)
    with pytest.raises(UndefinedAdvantage):
        relative_advantage(np.array([0, 0.5, 0.5, 0]), "pg", 0.5)


def test_engine_efficiency():
    assert engine_efficiency([0.2, 0.5], [0.1, 1.0]) == pytest.approx(1.0)
    assert engine_efficiency([0.05], [0.1]) == 0.0
    with pytest.raises(DimensionMismatch):
        engine_efficiency([0.1], [0.1, 0.2])
    with pytest.raises(UndefinedAdvantage):
        engine_efficiency([0.1], [0.0])
