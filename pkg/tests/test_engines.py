import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermoengines.core import InvalidParameter, qubit_context
from thermoengines.engines import (
    EngineKind, StrokeSchedule, extremal_strokes, is_parallel_product, local_thermality,
    ltocc1_channels, ltocc_channels, named_parallel_ltocc, named_symmetric_ltocc,
    parallel_ltocc_channels, run_protocol, separate_qubit_channels, separate_qubit_fixed_points,
    stroke_generator, stroke_pair, symmetric_thermality,
)

from oracles import frac_kron, frac_matmul, frac_matvec, frac_swap

exp_beta = st.floats(min_value=0.02, max_value=0.98)
STROKES = [("c", "c"), ("h", "h"), ("c", "h"), ("h", "c")]


def test_kind_parsing():
    assert EngineKind.parse("SeparateQubits") is EngineKind.SEPARATE_QUBITS
    assert EngineKind.parse("LTOCC2") is EngineKind.LTOCC2
    with pytest.raises(InvalidParameter):
        EngineKind.parse("nope")


def test_stroke_pairs():
    assert stroke_pair("to") == (("c", "c"), ("h", "h"))
    assert stroke_pair("slto") == (("c", "h"), ("h", "c"))
    assert stroke_pair("ltocc1", asymmetric=True) == (("c", "h"), ("h", "c"))
    with pytest.raises(InvalidParameter):
        stroke_pair("to", asymmetric=True)


@given(exp_beta, exp_beta)
@settings(max_examples=15)
def test_every_finite_stroke_is_gibbs_preserving(xc, xh):
    ctx = qubit_context(xc, xh)
    for kind in ("separate", "ltocc1", "ltocc2", "eto"):
        for stroke in (("c", "c"), ("h", "h")):
            g = ctx.weights(stroke)
            for ch in extremal_strokes(kind, ctx, stroke):
                assert np.allclose(ch.matrix.sum(axis=0), 1, atol=1e-12)
                assert np.allclose(ch.matrix @ g, g, atol=1e-12)


def test_channel_counts():
    ctx = qubit_context(0.3, 0.7)
    assert len(separate_qubit_channels(ctx, ("c", "c"))) == 4
    assert len(extremal_strokes("eto", ctx, ("c", "c"), include_identity=False)) >= 5
    assert len(ltocc_channels(ctx, ("c", "c"), 3)) >= len(ltocc_channels(ctx, ("c", "c"), 2))
    with pytest.raises(InvalidParameter):
        extremal_strokes("to", ctx, ("c", "c"))
    with pytest.raises(InvalidParameter):
        extremal_strokes("eslto", ctx, ("c", "c"))


def test_separate_channels_match_rational_kron():
    # x = 1/4 cold, y = 1/2 hot: exact rational thermal swaps
    ctx = qubit_context(0.25, 0.5)
    S = frac_swap(Fraction(1, 4))
    I = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
    ref = {tuple(map(tuple, frac_kron(a, b))) for a in (I, S) for b in (I, S)}
    got = {tuple(tuple(Fraction(v).limit_denominator(10**6) for v in row) for row in ch.matrix)
           for ch in separate_qubit_channels(ctx, ("c", "c"))}
    assert got == ref


def _brute_ltocc1(r):
    """Measure A, conditionally act on B, then post-process A; all exact."""
    I = [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
    S = frac_swap(r)
    out = set()
    for c0, c1, post in itertools.product((I, S), (I, S), (I, S)):
        cond = [[Fraction(0)] * 4 for _ in range(4)]
        for a in range(2):
            op = c0 if a == 0 else c1
            for b in range(2):
                for b2 in range(2):
                    cond[2 * a + b2][2 * a + b] = op[b2][b]
        m = frac_matmul(frac_kron(post, I), cond)
        out.add(tuple(tuple(float(v) for v in row) for row in m))
    return out


def test_ltocc1_cold_stroke_matches_rational_construction():
    ctx = qubit_context(0.25, 0.5)
    got = {tuple(tuple(round(v, 12) for v in row) for row in ch.matrix)
           for ch in ltocc1_channels(ctx, ("c", "c"))}
    ref = {tuple(tuple(round(v, 12) for v in row) for row in m) for m in _brute_ltocc1(Fraction(1, 4))}
    assert got == ref


@given(exp_beta, exp_beta)
@settings(max_examples=10)
def test_ltocc_stroke_inclusions(xc, xh):
    """Separate-qubit channels are LTOCC1 channels, which are two-round LTOCC channels."""
    ctx = qubit_context(xc, xh)
    for stroke in (("c", "c"), ("h", "h")):
        sets = [extremal_strokes(k, ctx, stroke) for k in ("separate", "ltocc1", "ltocc2")]
        for small, big in zip(sets, sets[1:]):
            B = np.array([c.matrix.ravel() for c in big])
            for ch in small:
                assert np.min(np.abs(B - ch.matrix.ravel()).max(axis=1)) < 1e-12


def test_protocol_schedule_and_generator():
    ctx = qubit_context(0.2, 0.6)
    gen = stroke_generator("separate", ctx)
    sched = StrokeSchedule.alternating([("h", "h"), ("c", "c")], [3, 3, 3])
    tr = run_protocol(ctx.weights(("c", "c")), sched, gen)
    assert len(tr.states) == 3 and np.isclose(tr.final.sum(), 1)
    with pytest.raises(InvalidParameter):
        gen(("c", "h"))
    with pytest.raises(InvalidParameter):
        run_protocol(ctx.weights(("c", "c")), StrokeSchedule.alternating([("c", "c")], [99]), gen)


@given(exp_beta, exp_beta)
@settings(max_examples=30)
def test_separate_qubit_fixed_points_match_limit_cycle(xc, xh):
    ctx = qubit_context(xc, xh)
    gt, Gt = separate_qubit_fixed_points(ctx)
    x, y = xc, xh
    # independent: stationary point of the two-swap cycle hot swap -> cold swap
    Sc = np.array([[1 - x, 1], [x, 0]])
    Sh = np.array([[1 - y, 1], [y, 0]])
    w, v = np.linalg.eig(Sc @ Sh)
    fix = np.real(v[:, np.argmin(np.abs(w - 1))])
    fix = fix / fix.sum()
    # the returned states sit right after the cold-labelled and hot-labelled swaps
    assert np.allclose(fix, gt, atol=1e-10)
    assert np.allclose(Sh @ fix, Gt, atol=1e-10)
    assert gt[0] == pytest.approx((1 - x) / (1 - x * y), abs=1e-12)
    assert Gt[0] == pytest.approx((1 - y) / (1 - x * y), abs=1e-12)


def test_fixed_points_rational_example():
    # x = 1/4, y = 1/2: gamma_tilde = (3/4)/(7/8) = 6/7
    ctx = qubit_context(0.25, 0.5)
    gt, Gt = separate_qubit_fixed_points(ctx)
    assert gt[0] == pytest.approx(6 / 7, abs=1e-14)
    assert Gt[0] == pytest.approx(frac_matvec(frac_swap(Fraction(1, 2)), [Fraction(6, 7), Fraction(1, 7)])[0], abs=1e-14)


PAPER_M = {
    "M00": lambda g: [[1, 0, 0, 1], [0, 1 - g, 0, 0], [0, 0, 1 - g, 0], [0, g, g, 0]],
    "M01": lambda g: [[1 - g, 0, 1 - g, 0], [0, 1, g, 0], [g, 0, 0, 1], [0, 0, 0, 0]],
    "M10": lambda g: [[1 - g, 1 - g, 0, 0], [g, 0, 0, 1], [0, g, 1, 0], [0, 0, 0, 0]],
    "M11": lambda g: [[(1 - g) ** 2, 1, 1, 0], [(1 - g) * g, 0, 0, 0], [(1 - g) * g, 0, 0, 0], [g * g, 0, 0, 1]],
}


@pytest.mark.parametrize("r", [0.6, 0.75, 0.9, 0.3])
def test_named_parallel_matrices_match_display(r):
    named = named_parallel_ltocc(r)
    for k, f in PAPER_M.items():
        assert np.allclose(named[k], f(r), atol=1e-15), k


@pytest.mark.parametrize("r", [0.6, 0.75, 0.9])
def test_named_channels_structure(r):
    g = np.array([1, r]) / (1 + r)
    named = {**named_parallel_ltocc(r), **named_symmetric_ltocc(r)}
    assert len(named) == 7
    for k, m in named.items():
        assert np.allclose(m.sum(axis=0), 1), k
        assert is_parallel_product(m), k
        assert local_thermality(m, g, g), k
    for k in ("M11", "MS1", "MS2", "MS3"):
        assert symmetric_thermality(named[k], g, g), k
    for k in ("M00", "M01", "M10"):
        assert not symmetric_thermality(named[k], g, g), k


@pytest.mark.parametrize("r", [0.6, 0.75, 0.9])
def test_parallel_channels_reach_sharp_states(r):
    named = named_parallel_ltocc(r)
    for idx, k in enumerate(("M00", "M01", "M10", "M11")):
        p = np.full(4, 0.25)
        for _ in range(200):
            p = named[k] @ p
        assert np.allclose(p, np.eye(4)[idx], atol=1e-8), k


@pytest.mark.parametrize("r", [0.6, 0.75, 0.9])
def test_symmetric_channels_move_the_excited_sharp_state(r):
    named = named_symmetric_ltocc(r)
    e11 = np.eye(4)[3]
    assert np.allclose(named["MS1"] @ e11, np.eye(4)[2])
    assert np.allclose(named["MS2"] @ e11, np.eye(4)[1])
    assert np.allclose(named["MS3"] @ e11, np.eye(4)[0])


def test_parallel_channel_family():
    ctx = qubit_context(0.4, 0.8)
    chans = parallel_ltocc_channels(ctx, ("c", "c"))
    assert len(chans) == 16
    assert all(is_parallel_product(c.matrix) for c in chans)


def test_eslto_swaps_cover_every_level_pair():
    # generic (cold, hot) product weights: all 6 unordered pairs have distinct energy
    ctx = qubit_context(0.3, 0.7)
    chans = extremal_strokes("eslto", ctx, ("c", "h"), include_identity=False)
    pairs = set()
    for ch in chans:
        off = np.abs(ch.matrix - np.diag(np.diag(ch.matrix))) > 1e-12
        i, j = np.nonzero(off)
        pairs.add(tuple(sorted(set(i) | set(j))))
    assert pairs == {(a, b) for a in range(4) for b in range(a + 1, 4)}
