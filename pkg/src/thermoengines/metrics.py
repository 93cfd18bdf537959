"""Task scores (cooling, heating, entanglement) and advantage measures."""
from __future__ import annotations

import enum
import math
from typing import Callable

import numpy as np

from .core import DimensionMismatch, GibbsContext, InvalidParameter, population

TOL_DENOM = 1e-14
# beta_c - beta_h above which gamma x Gamma admits an entangling rotation
ENTANGLEMENT_GAP = math.log(3 + 2 * math.sqrt(2))


class UndefinedAdvantage(ValueError):
    pass


class MetricKind(str, enum.Enum):
    GROUND_POP = "ground_pop"
    EXCITED_POP = "excited_pop"
    MAX_NEGATIVITY = "max_negativity"
    SLTO_M0 = "slto_m0"
    SLTO_M = "slto_m"

    @classmethod
    def parse(cls, name) -> "MetricKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"pg": "ground_pop", "p_g": "ground_pop", "pe": "excited_pop", "p_e": "excited_pop",
                   "n": "max_negativity", "negativity": "max_negativity", "nmax": "max_negativity", "n_max": "max_negativity",
                   "m0": "slto_m0", "m": "slto_m"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidParameter(f"unknown metric {name!r}") from None

    @property
    def needs_context(self) -> bool:
        return self in (MetricKind.SLTO_M0, MetricKind.SLTO_M)


def ground_pop(p) -> float:
    return float(population(p)[0])


def excited_pop(p) -> float:
    return float(population(p)[-1])


def max_negativity(p) -> float:
    """Largest negativity reachable by a unitary on the degenerate ``01/10`` block.

    For a diagonal two-qubit state this is
    ``max(sqrt((p00-p11)^2 + (p01-p10)^2) - p00 - p11, 0) / 2``.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (4,):
        raise DimensionMismatch("negativity is defined here for two qubits only")
    p00, p01, p10, p11 = p
    val = math.hypot(p00 - p11, p01 - p10) - p00 - p11
    return 0.5 * max(val, 0.0)


def entanglement_threshold(ctx: GibbsContext) -> bool:
    """Whether ``gamma x Gamma`` can be rotated into an entangled state.

    Uses ``|beta_c - beta_h|`` so nominal labels (``beta_h > beta_c``) work too.
    """
    return abs(ctx.betas.beta_c - ctx.betas.beta_h) > ENTANGLEMENT_GAP


def _top_gap(ctx: GibbsContext) -> float:
    e = ctx.levels.local_energies
    return e[-1] - e[-2]


def _top_factor(ctx: GibbsContext) -> float:
    # the hotter bath sets the cap; with nominal labels that is beta_c
    return math.exp(-min(ctx.betas.beta_c, ctx.betas.beta_h) * _top_gap(ctx))


def slto_monotone_m0(p, ctx: GibbsContext) -> float:
    """``max(p_top, exp(-beta_h (E_d - E_{d-1})))``; never increases under SLTO strokes."""
    return max(float(np.asarray(p)[-1]), _top_factor(ctx))


def slto_faithful_m(p, ctx: GibbsContext) -> float:
    return max(float(np.asarray(p)[-1]) - _top_factor(ctx), 0.0)


_PLAIN: dict[MetricKind, Callable] = {
    MetricKind.GROUND_POP: ground_pop,
    MetricKind.EXCITED_POP: excited_pop,
    MetricKind.MAX_NEGATIVITY: max_negativity,
}


def evaluate(metric, p, ctx: GibbsContext | None = None) -> float:
    metric = MetricKind.parse(metric)
    if metric.needs_context:
        if ctx is None:
            raise InvalidParameter(f"{metric.value} needs a Gibbs context")
        fn = slto_monotone_m0 if metric is MetricKind.SLTO_M0 else slto_faithful_m
        return fn(p, ctx)
    return _PLAIN[metric](p)


def reference_state(metric, ctx: GibbsContext) -> np.ndarray:
    """Free state of the other theory used as ``f*`` in the free advantage.

    ``gamma x gamma`` for ground population, ``Gamma x Gamma`` for excited.
    """
    metric = MetricKind.parse(metric)
    if metric is MetricKind.GROUND_POP:
        return ctx.weights(ctx.joint("c"))
    if metric is MetricKind.EXCITED_POP:
        return ctx.weights(ctx.joint("h"))
    raise UndefinedAdvantage(f"no advantage reference for {metric.value}")


def relative_advantage(s, metric, reachable_max: float) -> float:
    base = evaluate(metric, s)
    if base < TOL_DENOM:
        raise UndefinedAdvantage("metric of the starting state vanishes")
    return (reachable_max - base) / base


def free_advantage(s, metric, f_star_value: float) -> float:
    """``(max over reachable - f*) / f*``; ``s`` only fixes the metric's domain."""
    metric = MetricKind.parse(metric)
    if metric is MetricKind.MAX_NEGATIVITY:
        raise UndefinedAdvantage("negativity has no free reference state; report it raw")
    if f_star_value < TOL_DENOM:
        raise UndefinedAdvantage("reference value vanishes")
    return (evaluate(metric, s) - f_star_value) / f_star_value


def engine_efficiency(s_advantages, free_maxima) -> float:
    """``max(max_i A_f(s; M_i) / max_{s' free} A_f(s'; M_i) - 1, 0)``."""
    a = np.asarray(s_advantages, dtype=float)
    m = np.asarray(free_maxima, dtype=float)
    if a.shape != m.shape or a.size == 0:
        raise DimensionMismatch("one free-set maximum per metric required")
    if np.any(np.abs(m) < TOL_DENOM):
        raise UndefinedAdvantage("free-set maximum advantage vanishes")
    return max(float(np.max(a / m)) - 1.0, 0.0)
