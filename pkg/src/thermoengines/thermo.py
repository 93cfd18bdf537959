"""Thermomajorization: Lorenz curves, cone extremes and two-level thermal moves.

A state ``p`` thermo-majorizes ``q`` relative to a full-rank Gibbs vector
``g`` when the Lorenz curve of ``p`` lies on or above that of ``q``.  The
Lorenz curve is the concave piecewise-linear function obtained by sorting
levels by ``p_i / g_i`` (descending) and accumulating ``(g_i, p_i)``.

For batch work the curve is evaluated through its dual form

    L_p(x) = min_lambda [ lambda * x + sum_i max(p_i - lambda g_i, 0) ],

where ``lambda`` only needs to range over the slopes ``p_j / g_j`` and 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import InvalidParameter, DimensionMismatch, StochasticChannel, InverseTemperaturePair

TOL_MAJ = 1e-12
# cone extremes enumerate d! orderings; above this it stops being desk-scale
MAX_CONE_DIM = 8


@dataclass(frozen=True, eq=False)
class BetaOrdering:
    perm: np.ndarray  # level indices, highest p/g first
    ratios: np.ndarray  # p/g along perm (non-increasing)


@dataclass(frozen=True, eq=False)
class LorenzCurve:
    x: np.ndarray
    y: np.ndarray

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.y)


def _check_pair(p, g):
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    if p.shape != g.shape or p.ndim != 1:
        raise DimensionMismatch(f"state shape {p.shape} vs Gibbs shape {g.shape}")
    if np.any(g <= 0):
        raise InvalidParameter("Gibbs weights must be strictly positive")
    return p, g


def beta_ordering(p, g) -> BetaOrdering:
    p, g = _check_pair(p, g)
    r = p / g
    idx = np.arange(p.size)
    perm = np.lexsort((idx, -r))
    return BetaOrdering(perm, r[perm])


def lorenz_curve(p, g, *, merge_rtol: float = 1e-12) -> LorenzCurve:
    p, g = _check_pair(p, g)
    order = beta_ordering(p, g)
    xs = np.concatenate(([0.0], np.cumsum(g[order.perm])))
    ys = np.concatenate(([0.0], np.cumsum(p[order.perm])))
    # drop interior breakpoints where neighbouring segments are collinear
    keep = [0]
    r = order.ratios
    for k in range(1, p.size):
        if abs(r[k - 1] - r[k]) > merge_rtol * max(abs(r[k - 1]), abs(r[k]), 1.0):
            keep.append(k)
    keep.append(p.size)
    xs, ys = xs[keep], ys[keep]
    xs[-1], ys[-1] = 1.0, 1.0
    return LorenzCurve(xs, ys)


def lorenz_values(P, g, x) -> np.ndarray:
    """Lorenz curves of the rows of ``P`` evaluated at the points ``x``.

    Returns shape ``(n, len(x))``.  Works for any number of rows at once.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    lam = np.concatenate([P / g, np.zeros((P.shape[0], 1))], axis=1)  # (n, d+1)
    excess = np.maximum(P[:, None, :] - lam[:, :, None] * g[None, None, :], 0.0).sum(-1)  # (n, d+1)
    vals = lam[:, :, None] * x[None, None, :] + excess[:, :, None]
    return vals.min(axis=1)


def thermo_majorizes(p, q, g, tol: float = TOL_MAJ) -> bool:
    p, g = _check_pair(p, g)
    q, _ = _check_pair(q, g)
    xs = np.union1d(lorenz_curve(p, g).x, lorenz_curve(q, g).x)
    lp = lorenz_values(p, g, xs)[0]
    lq = lorenz_values(q, g, xs)[0]
    return bool(np.all(lp >= lq - tol))


@lru_cache(maxsize=None)
def _cone_tables(d: int):
    """Index tables for cone extremes in dimension ``d``.

    ``lo, hi`` (P, d): subset masks before/after adding the k-th level of
    each permutation; ``gather`` (P, d): position of level i in permutation.
    """
    if d > MAX_CONE_DIM:
        raise InvalidParameter(f"cone enumeration over {d}! orderings is not supported")
    perms = np.array(list(itertools.permutations(range(d))), dtype=np.int64)
    bits = (1 << perms).cumsum(axis=1)
    hi = bits
    lo = np.concatenate([np.zeros((len(perms), 1), dtype=np.int64), bits[:, :-1]], axis=1)
    gather = np.argsort(perms, axis=1)
    masks = np.arange(1 << d)
    membership = ((masks[:, None] >> np.arange(d)[None, :]) & 1).astype(float)  # (2^d, d)
    return perms, lo, hi, gather, membership


def cone_extremes_batch(P, g) -> np.ndarray:
    """Cone extremes for every row of ``P``: array of shape ``(n, d!, d)``.

    Entry ``[s, k]`` is the extreme point of the future cone of ``P[s]``
    associated with the k-th ordering in ``itertools.permutations`` order.
    Duplicates are not removed.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    g = np.asarray(g, dtype=float)
    d = g.size
    if P.shape[1] != d:
        raise DimensionMismatch("state and Gibbs vector differ in length")
    if np.any(g <= 0):
        raise InvalidParameter("Gibbs weights must be strictly positive")
    perms, lo, hi, gather, membership = _cone_tables(d)
    L = lorenz_values(P, g, membership @ g)  # (n, 2^d)
    L[:, 0] = 0.0
    L[:, -1] = 1.0
    diffs = L[:, hi] - L[:, lo]  # (n, P, d) in permutation order
    q = np.take_along_axis(diffs, np.broadcast_to(gather, diffs.shape), axis=2)
    return np.maximum(q, 0.0)


def unique_rows(X, decimals: int = 12) -> np.ndarray:
    """Rows of ``X`` unique after rounding; first occurrence kept unrounded."""
    X = np.asarray(X)
    _, idx = np.unique(np.round(X, decimals), axis=0, return_index=True)
    return X[np.sort(idx)]


def future_cone_extremes(p, g) -> np.ndarray:
    """Distinct extreme points of ``{q : p thermo-majorizes q}``, one per row."""
    p, g = _check_pair(p, g)
    return unique_rows(cone_extremes_batch(p[None, :], g)[0])


def two_level_swap(a: int, b: int, g) -> StochasticChannel:
    """Extremal Gibbs-preserving move on levels ``a`` and ``b`` (thermal swap)."""
    g = np.asarray(g, dtype=float)
    if a == b:
        raise InvalidParameter("thermal swap needs two distinct levels")
    if g[a] < g[b]:
        a, b = b, a
    r = g[b] / g[a]
    m = np.eye(g.size)
    m[a, a], m[a, b] = 1.0 - r, 1.0
    m[b, a], m[b, b] = r, 0.0
    return StochasticChannel(m, g, f"swap({a},{b})")


def slto_swap_pair(betas: InverseTemperaturePair, delta_e: float, k: int = 1) -> StochasticChannel:
    """Block of ``k`` swap/exchange/swap cycles on the two nearly-top levels.

    The 2x2 block is written in the basis ``((E_{d-1},E_d), (E_d,E_{d-1}))``,
    i.e. ``(01, 10)`` for qubits with the first subsystem on the cold bath.
    """
    if delta_e <= 0:
        raise InvalidParameter("delta_e must be positive")
    if k < 0:
        raise InvalidParameter("k must be non-negative")
    g = math.exp(-abs(betas.beta_c - betas.beta_h) * delta_e)
    g2k = g ** (2 * k)
    return StochasticChannel(np.array([[g2k, 0.0], [1.0 - g2k, 1.0]]), None, f"slto_pair^{k}")


def cone_extreme_channel(p, g, perm) -> StochasticChannel:
    """Gibbs-preserving channel sending ``p`` to its cone extreme for ``perm``.

    Within the region of states sharing ``p``'s beta-ordering the Lorenz
    curve is linear in the state, so the extreme map is a matrix whose
    column ``j`` spreads level ``j``'s Gibbs weight over the levels of
    ``perm``.  The result is exact, not an LP solution.
    """
    p, g = _check_pair(p, g)
    perm = np.asarray(perm, dtype=int)
    sigma = beta_ordering(p, g).perm
    start = np.empty_like(g)
    start[sigma] = np.concatenate(([0.0], np.cumsum(g[sigma])[:-1]))
    cuts = np.concatenate(([0.0], np.cumsum(g[perm])))
    cuts[-1] = 1.0
    # coverage[k, j] = fraction of level j filled once weight cuts[k] is poured in sigma order
    coverage = np.clip((cuts[:, None] - start[None, :]) / g[None, :], 0.0, 1.0)
    m = np.zeros((g.size, g.size))
    m[perm, :] = np.diff(coverage, axis=0)
    return StochasticChannel(m, g, "cone" + "".join(map(str, perm)))
