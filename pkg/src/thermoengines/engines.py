"""Engine classes: extremal stroke channels and protocol execution.

A stroke is a tuple of bath labels, one per subsystem: ``('c', 'c')`` is a
joint cold stroke, ``('c', 'h')`` couples subsystem A to the cold bath and B
to the hot one.  Joint-bath engines alternate ``cc``/``hh``; semilocal
engines (and LTOCC in asymmetric mode) alternate ``ch``/``hc``.

LTOCC channels are built from qubit layers ``I`` and the thermal swap
``S = ((1-r, 1), (r, 0))`` with ``r = exp(-beta * gap)`` at the bath seen by
the acted-on subsystem.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    COLD, HOT, DimensionMismatch, GibbsContext, InvalidParameter, StochasticChannel,
    apply_channel, population,
)
from .thermo import two_level_swap

TOL_DEDUP_DECIMALS = 12


class EngineKind(str, enum.Enum):
    SEPARATE_QUBITS = "separate"
    LTOCC1 = "ltocc1"
    LTOCC2 = "ltocc2"
    ETO = "eto"
    TO = "to"
    ESLTO = "eslto"
    SLTO = "slto"
    PARALLEL_LTOCC_M = "pltocc"
    SYMMETRIC_LTOCC_M = "sltocc"

    @classmethod
    def parse(cls, name: "str | EngineKind") -> "EngineKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "separate_qubits": "separate", "separatequbits": "separate", "sq": "separate",
            "parallel_ltocc_m": "pltocc", "parallelltocc_m": "pltocc", "ltocc_m": "pltocc",
            "symmetric_ltocc_m": "sltocc", "symmetricltocc_m": "sltocc",
        }
        key = aliases.get(key, key)
        for k in cls:
            if k.value == key or k.name.lower() == key:
                return k
        raise InvalidParameter(f"unknown engine kind {name!r}")

    @property
    def semilocal(self) -> bool:
        return self in (EngineKind.ESLTO, EngineKind.SLTO)

    @property
    def cone_driven(self) -> bool:
        return self in (EngineKind.TO, EngineKind.SLTO)


JOINT_KINDS = (EngineKind.SEPARATE_QUBITS, EngineKind.LTOCC1, EngineKind.LTOCC2,
               EngineKind.ETO, EngineKind.TO)


def stroke_pair(kind: EngineKind, asymmetric: bool = False) -> tuple[tuple[str, str], tuple[str, str]]:
    """Bath assignments of theory 1 and theory 2 for a two-subsystem engine."""
    kind = EngineKind.parse(kind)
    if kind.semilocal or (asymmetric and kind in (EngineKind.LTOCC1, EngineKind.LTOCC2)):
        return (COLD, HOT), (HOT, COLD)
    if asymmetric:
        raise InvalidParameter(f"{kind.value} has no asymmetric temperature mode")
    return (COLD, COLD), (HOT, HOT)


def _require_qubits(ctx: GibbsContext):
    if ctx.levels.local_dim != 2 or ctx.levels.num_subsystems != 2:
        raise InvalidParameter("this engine is defined for two qubits only")


def _check_stroke(ctx: GibbsContext, stroke) -> tuple[str, ...]:
    stroke = tuple(stroke)
    if len(stroke) != ctx.levels.num_subsystems or set(stroke) - {COLD, HOT}:
        raise InvalidParameter(f"illegal stroke {stroke!r}")
    return stroke


def qubit_ratio(ctx: GibbsContext, bath: str) -> float:
    """Excited/ground Gibbs ratio ``exp(-beta * gap)`` of a qubit at ``bath``."""
    g = ctx.local(bath)
    return float(g[1] / g[0])


def qubit_layers(r: float) -> tuple[np.ndarray, np.ndarray]:
    """The two extremal qubit thermal operations: identity and thermal swap."""
    return np.eye(2), np.array([[1.0 - r, 1.0], [r, 0.0]])


def conditional_layer(ops: Sequence[np.ndarray], target: int) -> np.ndarray:
    """4x4 matrix applying ``ops[k]`` to ``target`` when the other qubit is in ``k``."""
    m = np.zeros((4, 4))
    for k, op in enumerate(ops):
        proj = np.zeros((2, 2))
        proj[k, k] = 1.0
        m += np.kron(op, proj) if target == 0 else np.kron(proj, op)
    return m


def dedup_channels(channels: list[StochasticChannel]) -> list[StochasticChannel]:
    seen = set()
    out = []
    for ch in channels:
        key = np.round(ch.matrix, TOL_DEDUP_DECIMALS).tobytes()
        if key not in seen:
            seen.add(key)
            out.append(ch)
    return out


def separate_qubit_channels(ctx: GibbsContext, stroke) -> list[StochasticChannel]:
    _require_qubits(ctx)
    stroke = _check_stroke(ctx, stroke)
    la = qubit_layers(qubit_ratio(ctx, stroke[0]))
    lb = qubit_layers(qubit_ratio(ctx, stroke[1]))
    g = ctx.weights(stroke)
    return [StochasticChannel(np.kron(a, b), g, f"sep{i}{j}")
            for (i, a), (j, b) in itertools.product(enumerate(la), enumerate(lb))]


def _measurer(stroke) -> int:
    """Party that measures in one-round LTOCC.

    Joint strokes: A measures on cold strokes, B on hot ones.  Mixed strokes:
    the party sitting at the cold bath measures.
    """
    if stroke[0] == stroke[1]:
        return 0 if stroke[0] == COLD else 1
    return stroke.index(COLD)


def ltocc1_channels(ctx: GibbsContext, stroke) -> list[StochasticChannel]:
    """One-round LTOCC: measure, conditional op on the partner, post-process."""
    _require_qubits(ctx)
    stroke = _check_stroke(ctx, stroke)
    meas = _measurer(stroke)
    target = 1 - meas
    lt = qubit_layers(qubit_ratio(ctx, stroke[target]))
    lm = qubit_layers(qubit_ratio(ctx, stroke[meas]))
    g = ctx.weights(stroke)
    out = []
    for cond in itertools.product(range(2), repeat=2):
        c = conditional_layer([lt[i] for i in cond], target)
        for post in range(2):
            p = np.kron(lm[post], np.eye(2)) if meas == 0 else np.kron(np.eye(2), lm[post])
            out.append(StochasticChannel(p @ c, g, f"l1 c{cond[0]}{cond[1]} p{post}"))
    return dedup_channels(out)


def ltocc_channels(ctx: GibbsContext, stroke, rounds: int = 2) -> list[StochasticChannel]:
    """Memoryless ``rounds``-round LTOCC at one stroke.

    Each round one party measures and the other applies a thermal layer
    conditioned on the outcome; targets alternate and both starting parties
    are enumerated.  Every round is a product of two-level thermal swaps, so
    these channels are elementary-thermal compositions.
    """
    _require_qubits(ctx)
    if rounds < 1:
        raise InvalidParameter("rounds must be >= 1")
    stroke = _check_stroke(ctx, stroke)
    layers = [qubit_layers(qubit_ratio(ctx, stroke[t])) for t in (0, 1)]
    cond = {t: [conditional_layer([layers[t][a], layers[t][b]], t)
                for a, b in itertools.product(range(2), repeat=2)] for t in (0, 1)}
    g = ctx.weights(stroke)
    out = []
    for first in (0, 1):
        targets = [(first + k) % 2 for k in range(rounds)]
        for choice in itertools.product(range(4), repeat=rounds):
            m = np.eye(4)
            for t, c in zip(targets, choice):
                m = cond[t][c] @ m
            out.append(StochasticChannel(m, g, f"l{rounds} t{first} " + "".join(map(str, choice))))
    return dedup_channels(out)


def level_swap_channels(g: np.ndarray) -> list[StochasticChannel]:
    d = g.size
    return [two_level_swap(a, b, g) for a, b in itertools.combinations(range(d), 2)]


def extremal_strokes(kind, ctx: GibbsContext, stroke, *, rounds: int | None = None,
                     include_identity: bool = True) -> list[StochasticChannel]:
    """Finite list of extremal channels of ``kind`` at ``stroke``.

    Identity is prepended when ``include_identity`` is set, so that the
    explored sets grow monotonically.  TO and SLTO have no finite list.
    """
    kind = EngineKind.parse(kind)
    stroke = _check_stroke(ctx, stroke)
    g = ctx.weights(stroke)
    if kind == EngineKind.SEPARATE_QUBITS:
        chans = separate_qubit_channels(ctx, stroke)
    elif kind == EngineKind.LTOCC1:
        chans = ltocc1_channels(ctx, stroke)
    elif kind == EngineKind.LTOCC2:
        chans = ltocc_channels(ctx, stroke, rounds or 2)
    elif kind in (EngineKind.ETO, EngineKind.ESLTO):
        if kind == EngineKind.ESLTO and stroke[0] == stroke[1]:
            raise InvalidParameter("ESLTO strokes couple the subsystems to different baths")
        chans = level_swap_channels(g)
        if kind == EngineKind.ETO and ctx.levels.local_dim == 2 and ctx.levels.num_subsystems == 2:
            # two-round LTOCC maps are products of elementary swaps; listing them
            # keeps every ETO stroke a superset of the LTOCC stroke it dominates
            chans = chans + ltocc_channels(ctx, stroke, 2)
    elif kind == EngineKind.PARALLEL_LTOCC_M:
        chans = parallel_ltocc_channels(ctx, stroke)
    elif kind == EngineKind.SYMMETRIC_LTOCC_M:
        chans = symmetric_ltocc_channels(ctx, stroke)
    else:
        raise InvalidParameter(f"{kind.value} is cone-driven and has no finite stroke list")
    if include_identity:
        chans = [StochasticChannel(np.eye(g.size), chans[0].preserved_gibbs, "id")] + chans
    return dedup_channels(chans)


# ---------------------------------------------------------------- memory LTOCC

def parallel_product(layers_a: Sequence[np.ndarray], layers_b: Sequence[np.ndarray]) -> np.ndarray:
    """``M[ij,kl] = T^A[i,k | l] T^B[j,l | k]``: A's layer picked by B's input and vice versa."""
    m = np.zeros((2, 2, 2, 2))
    for k, l in itertools.product(range(2), repeat=2):
        m[:, :, k, l] = np.outer(layers_a[l][:, k], layers_b[k][:, l])
    return m.reshape(4, 4)


def parallel_ltocc_channels(ctx: GibbsContext, stroke=None) -> list[StochasticChannel]:
    """All 16 parallel LTOCC channels (layer choices from {I, S}) at a stroke."""
    _require_qubits(ctx)
    stroke = _check_stroke(ctx, stroke if stroke is not None else (COLD, COLD))
    la = qubit_layers(qubit_ratio(ctx, stroke[0]))
    lb = qubit_layers(qubit_ratio(ctx, stroke[1]))
    out = []
    for a0, a1, b0, b1 in itertools.product(range(2), repeat=4):
        m = parallel_product([la[a0], la[a1]], [lb[b0], lb[b1]])
        out.append(StochasticChannel(m, None, f"par A{a0}{a1} B{b0}{b1}"))
    return out


def named_parallel_ltocc(r: float) -> dict[str, np.ndarray]:
    """The four named parallel channels with local swap ratio ``r``.

    ``M00`` fixes ``|00>``, ``M01`` fixes ``|01>`` and so on.
    """
    i, s = qubit_layers(r)
    # M^{(ab)}: A swaps when B's input differs from b, B swaps when A's input differs from a
    out = {}
    for a, b in itertools.product(range(2), repeat=2):
        la = [i if l == b else s for l in range(2)]
        lb = [i if k == a else s for k in range(2)]
        out[f"M{a}{b}"] = parallel_product(la, lb)
    return out


def named_symmetric_ltocc(r: float) -> dict[str, np.ndarray]:
    g = r
    a = 1 - (1 - g) * g
    ms1 = np.array([
        [(1 - g) * a, 1 - g, 1 - g, 0],
        [(1 - g) ** 2 * g, g, g, 0],
        [g * a, 0, 0, 1],
        [(1 - g) * g * g, 0, 0, 0]])
    ms2 = ms1[[0, 2, 1, 3]]
    ms3 = np.array([
        [a * a, (1 - g) ** 2, (1 - g) ** 2, 1],
        [(1 - g) * g * a, (1 - g) * g, (1 - g) * g, 0],
        [(1 - g) * g * a, (1 - g) * g, (1 - g) * g, 0],
        [(1 - g) ** 2 * g * g, g * g, g * g, 0]])
    return {"M11": named_parallel_ltocc(r)["M11"], "MS1": ms1, "MS2": ms2, "MS3": ms3}


def symmetric_ltocc_channels(ctx: GibbsContext, stroke=None) -> list[StochasticChannel]:
    """``[M11, MS1, MS2, MS3]`` at a joint stroke."""
    _require_qubits(ctx)
    stroke = _check_stroke(ctx, stroke if stroke is not None else (COLD, COLD))
    if stroke[0] != stroke[1]:
        raise InvalidParameter("symmetric LTOCC channels are defined at a joint stroke")
    named = named_symmetric_ltocc(qubit_ratio(ctx, stroke[0]))
    return [StochasticChannel(m, None, k) for k, m in named.items()]


def parallel_tensors(m) -> tuple[np.ndarray, np.ndarray]:
    """Marginal tensors ``T^A[i,k,l]`` and ``T^B[j,k,l]`` of a 4x4 channel."""
    t = np.asarray(m, dtype=float).reshape(2, 2, 2, 2)
    return t.sum(axis=1), t.sum(axis=0)


def is_parallel_product(m, atol: float = 1e-12) -> bool:
    ta, tb = parallel_tensors(m)
    return bool(np.allclose(np.einsum("ikl,jkl->ijkl", ta, tb).reshape(4, 4), m, atol=atol))


def local_thermality(m, ga, gb, atol: float = 1e-10) -> bool:
    """Each party's layer preserves its Gibbs state for every partner input."""
    ta, tb = parallel_tensors(m)
    ok_a = np.allclose(np.einsum("ikl,k->il", ta, ga), np.asarray(ga)[:, None], atol=atol)
    ok_b = np.allclose(np.einsum("jkl,l->jk", tb, gb), np.asarray(gb)[:, None], atol=atol)
    return bool(ok_a and ok_b)


def symmetric_thermality(m, ga, gb, atol: float = 1e-10) -> bool:
    """A Gibbs input on one side leaves the other side's output marginal Gibbs."""
    ta, tb = parallel_tensors(m)
    ok_a = np.allclose(np.einsum("ikl,l->ik", ta, gb), np.asarray(ga)[:, None], atol=atol)
    ok_b = np.allclose(np.einsum("jkl,k->jl", tb, ga), np.asarray(gb)[:, None], atol=atol)
    return bool(ok_a and ok_b)


# ------------------------------------------------------------------ protocols

@dataclass(frozen=True)
class StrokeSchedule:
    """Sequence of ``(stroke, channel index)`` pairs."""

    steps: tuple[tuple[tuple[str, ...], int], ...] = ()

    @classmethod
    def alternating(cls, strokes, indices) -> "StrokeSchedule":
        strokes = list(strokes)
        return cls(tuple((tuple(strokes[i % len(strokes)]), int(k)) for i, k in enumerate(indices)))

    def __len__(self):
        return len(self.steps)


@dataclass(eq=False)
class ProtocolTrace:
    initial: np.ndarray
    channels: list[StochasticChannel] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1] if self.states else self.initial


def stroke_generator(kind, ctx: GibbsContext, *, asymmetric: bool = False,
                     rounds: int | None = None) -> Callable[[tuple], list[StochasticChannel]]:
    """Cached stroke -> channel-list map that rejects strokes illegal for ``kind``."""
    kind = EngineKind.parse(kind)
    legal = set(stroke_pair(kind, asymmetric))
    cache: dict[tuple, list[StochasticChannel]] = {}

    def gen(stroke):
        stroke = tuple(stroke)
        if stroke not in legal:
            raise InvalidParameter(f"stroke {stroke} is illegal for {kind.value}")
        if stroke not in cache:
            cache[stroke] = extremal_strokes(kind, ctx, stroke, rounds=rounds)
        return cache[stroke]

    return gen


def run_protocol(p0, schedule, generator=None) -> ProtocolTrace:
    """Apply a schedule of strokes.

    ``schedule`` is either a :class:`StrokeSchedule` (then ``generator`` maps
    a stroke to its channel list) or a plain sequence of channels.
    """
    p = population(p0)
    trace = ProtocolTrace(p)
    if isinstance(schedule, StrokeSchedule):
        if generator is None:
            raise InvalidParameter("a stroke schedule needs a channel generator")
        chans = []
        for stroke, idx in schedule.steps:
            options = generator(stroke)
            if not 0 <= idx < len(options):
                raise InvalidParameter(f"channel index {idx} out of range for stroke {stroke}")
            chans.append(options[idx])
    else:
        chans = list(schedule)
    for ch in chans:
        if ch.dim != p.size:
            raise DimensionMismatch("channel and state dimensions differ")
        p = apply_channel(ch, p)
        trace.channels.append(ch)
        trace.states.append(p)
    return trace


def separate_qubit_fixed_points(ctx: GibbsContext) -> tuple[np.ndarray, np.ndarray]:
    """Coldest and hottest qubit states of alternating extreme swaps.

    Returns ``(gamma_tilde, Gamma_tilde)`` as qubit population vectors:
    the states right after the cold-labelled and hot-labelled swaps of the
    limit cycle.  With nominal labels (``beta_h > beta_c``) the roles flip.
    """
    if ctx.levels.local_dim != 2:
        raise InvalidParameter("fixed points are defined for qubit subsystems")
    gam, Gam = ctx.gamma, ctx.Gamma
    den = Gam + gam - 1.0
    if abs(den) < 1e-15:
        raise InvalidParameter("singular fixed-point denominator (both baths at infinite temperature)")
    gt = min((2 * gam - 1) * Gam / den, 1.0)
    Gt = max((2 * Gam - 1) * gam / den, 0.0)
    return np.array([gt, 1 - gt]), np.array([Gt, 1 - Gt])
