"""Iterative inner approximation of an engine's free-state set.

Starting from a free state of the first theory, strokes of the two theories
are applied alternately to every kept point; after each stroke only the
extreme points of the convex hull survive, optionally thinned by rounding
to a ``delta`` grid.  The loop stops once a full engine cycle (two strokes)
grows the hull volume by a relative amount below ``eps``.

Hull computations happen in the affine chart that drops the last
population (so the probability simplex of two qubits is the standard
tetrahedron of volume 1/6).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist

from .core import GibbsContext, InvalidParameter, StochasticChannel, population
from .engines import EngineKind, ProtocolTrace, extremal_strokes, run_protocol, stroke_pair
from .thermo import cone_extreme_channel, cone_extremes_batch, _cone_tables

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
MEMBERSHIP_TOL = 1e-9
INTERIOR_MARGIN = 1e-12
NEAR_FACET = 1e-9
LOCAL_ACCEPT = 1e-12


@dataclass
class ExplorerConfig:
    kind: EngineKind | str
    ctx: GibbsContext
    max_iters: int = 200
    volume_tol: float = 1e-7
    dedup_tol: float = 1e-5
    start: np.ndarray | None = None
    asymmetric: bool = False  # LTOCC only: subsystems sit at different baths
    rounds: int | None = None  # LTOCC2 only: number of communication rounds

    def __post_init__(self):
        self.kind = EngineKind.parse(self.kind)
        if self.max_iters < 1:
            raise InvalidParameter("max_iters must be >= 1")
        if not self.volume_tol > 0:
            raise InvalidParameter("volume_tol must be > 0")
        if self.dedup_tol < 0:
            raise InvalidParameter("dedup_tol must be >= 0")

    @property
    def strokes(self):
        return stroke_pair(self.kind, self.asymmetric)

    def start_state(self) -> np.ndarray:
        if self.start is not None:
            return population(self.start)
        return self.ctx.weights(self.strokes[0])


@dataclass(eq=False)
class FreeSetApprox:
    extreme_points: np.ndarray
    volume: float
    iterations_used: int
    converged: bool
    convergence_mode: str
    volumes: list[float] = field(default_factory=list)
    config: ExplorerConfig | None = None
    # generating history: node -> (parent node, stroke parity, op index)
    node_ids: np.ndarray | None = None
    parents: np.ndarray | None = None
    stroke_of: np.ndarray | None = None
    ops: np.ndarray | None = None

    def __len__(self):
        return len(self.extreme_points)

    def max_of(self, fn) -> float:
        return float(max(fn(p) for p in self.extreme_points))


# ---------------------------------------------------------------- hull tools

def _frame(X: np.ndarray):
    """Centre, orthonormal directions and rank of the affine hull of ``X``."""
    c = X.mean(axis=0)
    if len(X) == 1:
        return c, np.zeros((0, X.shape[1])), 0
    Xc = X - c
    w, v = np.linalg.eigh(Xc.T @ Xc / len(X))
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    rank = int(np.sum(np.sqrt(np.maximum(w, 0.0)) > RANK_TOL))
    return c, v[:, :rank].T, rank


def _chart_hull(X: np.ndarray) -> tuple[np.ndarray, float]:
    """Extreme-point indices of ``conv(X)`` and its chart volume."""
    if len(X) <= 1:
        return np.arange(len(X)), 0.0
    chart = X[:, :-1]
    c, basis, rank = _frame(chart)
    if rank == 0:
        return np.array([0]), 0.0
    if rank == chart.shape[1]:
        # near-duplicate points can trip qhull's precision checks; widen
        # tolerance, then joggle, before treating the set as flat
        for opts in (None, "Qt Q12", "QJ"):
            try:
                h = ConvexHull(chart, qhull_options=opts)
                return np.sort(h.vertices), float(h.volume)
            except QhullError:
                continue
        rank -= 1
        basis = basis[:rank]
    Y = (chart - c) @ basis.T
    if rank == 1:
        return np.unique([int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))]), 0.0
    try:
        verts = ConvexHull(Y).vertices
    except QhullError:
        verts = ConvexHull(Y, qhull_options="QJ").vertices
    return np.sort(verts), 0.0


_PROBE_DIRS = np.random.default_rng(7).standard_normal((64, 3))


def _facets(X: np.ndarray) -> np.ndarray | None:
    """Facet inequalities ``a.x + b <= 0`` of a small polytope inside ``conv(X)``.

    The polytope is the chart hull of the points of ``X`` extreme along a
    fixed set of directions; anything strictly inside it lies strictly
    inside ``conv(X)``.  ``None`` when that hull is not full-dimensional.
    """
    if X.shape[1] != 4 or len(X) < 4:
        return None
    chart = X[:, :-1]
    sub = chart[np.unique(np.argmax(chart @ _PROBE_DIRS.T, axis=0))]
    if len(sub) < 4 or _frame(sub)[2] < 3:
        return None
    try:
        return ConvexHull(sub).equations
    except QhullError:
        return None


def hull_extreme_indices(points) -> np.ndarray:
    """Indices (ascending) of the extreme points of ``conv(points)``."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    return _chart_hull(X)[0]


def hull_extreme_points(points) -> np.ndarray:
    X = np.atleast_2d(np.asarray(points, dtype=float))
    return X[hull_extreme_indices(X)]


def hull_volume(points) -> float:
    """Volume of the hull in the chart dropping the last coordinate; 0 if flat."""
    X = np.atleast_2d(np.asarray(points, dtype=float))
    return _chart_hull(X)[1]


def hausdorff(A, B) -> float:
    """Hausdorff distance between two finite point sets (sup norm per pair is Euclidean)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    D = cdist(A, B)
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def hull_distance(point, vertices) -> float:
    """Euclidean distance from ``point`` to ``conv(vertices)``.

    Solved as non-negative least squares with a heavily weighted row forcing
    the weights to sum to one.
    """
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    x = np.asarray(point, dtype=float)
    w_sum = 1e3
    A = np.vstack([V.T, w_sum * np.ones(len(V))])
    b = np.concatenate([x, [w_sum]])
    lam, _ = nnls(A, b, maxiter=50 * len(V) + 100)
    lam = lam / lam.sum()
    return float(np.linalg.norm(V.T @ lam - x))


def hull_distances(points, vertices) -> np.ndarray:
    """:func:`hull_distance` for many points.

    Points of the probability simplex that satisfy every facet inequality
    of a full-dimensional hull are inside it and get 0 without a solve.
    Points on or just outside the boundary are first measured against the
    vertices of the facets they nearly touch; that smaller hull lies inside
    ``conv(vertices)``, so its distance is an upper bound and a vanishing
    one is accepted.  Everything else gets the full solve.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    out = np.full(len(X), np.nan)
    hull = None
    if V.shape[1] == 4 and len(V) >= 4 and _frame(V[:, :-1])[2] == 3:
        try:
            hull = ConvexHull(V[:, :-1], qhull_options="Qt Q12")
        except QhullError:
            hull = None
    if hull is not None:
        eq = hull.equations
        viol = X[:, :-1] @ eq[:, :-1].T + eq[:, -1]
        on_simplex = np.abs(X.sum(axis=1) - 1.0) < 1e-12
        out[on_simplex & np.all(viol <= 0.0, axis=1)] = 0.0
        for i in np.nonzero(np.isnan(out) & on_simplex)[0]:
            near = np.unique(hull.simplices[viol[i] > -NEAR_FACET])
            if len(near):
                d = hull_distance(X[i], V[near])
                if d <= LOCAL_ACCEPT:
                    out[i] = d
    for i in np.nonzero(np.isnan(out))[0]:
        out[i] = hull_distance(X[i], V)
    return out


def hausdorff_hulls(A, B) -> float:
    """Hausdorff distance between ``conv(A)`` and ``conv(B)`` (vertex-based, exact for polytopes)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return float(max(hull_distances(A, B).max(), hull_distances(B, A).max()))


def membership(point, approx: "FreeSetApprox | np.ndarray", tol: float = MEMBERSHIP_TOL) -> bool:
    V = approx.extreme_points if isinstance(approx, FreeSetApprox) else approx
    return hull_distance(point, V) <= tol


_HASH_DIR = np.random.default_rng(20240607).standard_normal(16)


def _exact_dedup(X: np.ndarray, decimals: int = 13) -> np.ndarray:
    """Indices (ascending) of rows unique after rounding.

    Rows are hashed to a scalar by a fixed random projection of the rounded
    values, which turns the row sort into a 1-D sort.
    """
    keys = np.round(X, decimals) @ _HASH_DIR[: X.shape[1]]
    _, idx = np.unique(keys, return_index=True)
    return np.sort(idx)


_CELL_MIX = np.random.default_rng(11).integers(1, 2**61, size=16, dtype=np.int64)


def _cell_keys(X: np.ndarray, delta: float) -> np.ndarray:
    # int64 hash of the delta-grid cell (wrap-around collisions are negligible)
    cells = np.floor(X / delta).astype(np.int64)
    return cells @ _CELL_MIX[: X.shape[1]]


def _delta_filter(P: np.ndarray, Q: np.ndarray, delta: float) -> np.ndarray:
    """Indices of rows of ``Q`` whose ``delta``-cell is free.

    A cell is taken if a point of ``P`` or an earlier row of ``Q`` lies in
    it; the earlier (unrounded) point is the one kept.
    """
    if delta <= 0 or len(Q) == 0:
        return np.arange(len(Q))
    kq = _cell_keys(Q, delta)
    _, first = np.unique(kq, return_index=True)
    first = np.sort(first)
    return first[~np.isin(kq[first], _cell_keys(P, delta))]


# ---------------------------------------------------------------- explorer

class _Stroke:
    """Expansion rule of one theory: a channel stack or a Gibbs vector for cones."""

    def __init__(self, cfg: ExplorerConfig, stroke):
        self.stroke = stroke
        self.g = cfg.ctx.weights(stroke)
        if cfg.kind.cone_driven:
            self.channels = None
            self.n_ops = len(_cone_tables(self.g.size)[0])
        else:
            self.channels = extremal_strokes(cfg.kind, cfg.ctx, stroke, rounds=cfg.rounds)
            self.stack = np.stack([c.matrix for c in self.channels])
            self.n_ops = len(self.channels)

    def expand(self, P: np.ndarray) -> np.ndarray:
        if self.channels is None:
            Q = cone_extremes_batch(P, self.g)
        else:
            Q = np.einsum("mij,nj->nmi", self.stack, P)
        return Q.reshape(-1, P.shape[1])

    def channel_for(self, p: np.ndarray, op: int) -> StochasticChannel:
        if self.channels is not None:
            return self.channels[op]
        perms = _cone_tables(self.g.size)[0]
        return cone_extreme_channel(p, self.g, perms[op])


def _volume_gain(v_new: float, v_ref: float) -> float:
    return (v_new - v_ref) / v_ref


def explore_free_set(cfg: ExplorerConfig) -> FreeSetApprox:
    """Alternate the two theories' strokes until the hull volume settles.

    A point only needs a theory's stroke applied once: its images stay in
    the (monotonically growing) hull afterwards.  Each kept point therefore
    carries a flag per theory and only unflagged points are expanded.  For
    cone-driven kinds an image is itself closed under the same theory
    (thermomajorization is transitive), so new points start flagged for the
    theory that produced them.
    """
    strokes = [_Stroke(cfg, s) for s in cfg.strokes]
    P = cfg.start_state()[None, :]
    ids = np.array([0])
    done = np.zeros((1, 2), dtype=bool)
    parents, stroke_of, ops = [-1], [-1], [-1]
    history = [P]
    facets = None
    volumes = [0.0]
    converged = False
    mode = "volume"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        t = it % 2  # the first stroke applies theory 2 to a theory-1 free state
        st = strokes[t]
        fresh = ~done[:, t]
        Q_new = st.expand(P[fresh])
        src_all = np.repeat(ids[fresh], st.n_ops)
        op_all = np.tile(np.arange(st.n_ops), int(fresh.sum()))
        uniq = _exact_dedup(Q_new)
        if facets is not None and len(uniq):
            # images strictly inside conv(P) cannot be vertices of the new hull
            inside = np.all(Q_new[uniq, :-1] @ facets[:, :-1].T + facets[:, -1] < -INTERIOR_MARGIN, axis=1)
            uniq = uniq[~inside]
        Q_new, src_all, op_all = Q_new[uniq], src_all[uniq], op_all[uniq]
        free = _delta_filter(P, Q_new, cfg.dedup_tol)
        Q_new, src_all, op_all = Q_new[free], src_all[free], op_all[free]
        n_old = len(P)
        Q = np.concatenate([P, Q_new])
        keep, vol = _chart_hull(Q)
        old = keep[keep < n_old]
        new = keep[keep >= n_old] - n_old
        src = src_all[new]
        op = op_all[new]
        new_ids = np.arange(len(parents), len(parents) + len(new))
        parents.extend(src.tolist())
        stroke_of.extend([t] * len(new))
        ops.extend(op.tolist())
        done_old = done[old]
        done_old[:, t] = True
        done_new = np.zeros((len(new), 2), dtype=bool)
        done_new[:, t] = st.channels is None
        P = np.concatenate([P[old], Q_new[new]])
        ids = np.concatenate([ids[old], new_ids])
        done = np.concatenate([done_old, done_new])
        facets = _facets(P)
        volumes.append(vol)  # conv(P) only grows, so this is monotone
        history.append(P)
        ref = max(it - 2, 0)
        if volumes[ref] > 0 and volumes[-1] > 0:
            mode = "volume"
            if _volume_gain(volumes[-1], volumes[ref]) <= cfg.volume_tol:
                converged = True
                break
        else:
            mode = "displacement"
            if hausdorff(P, history[ref]) <= cfg.volume_tol:
                converged = True
                break
    return FreeSetApprox(
        extreme_points=P, volume=volumes[-1], iterations_used=it, converged=converged,
        convergence_mode=mode, volumes=volumes, config=cfg, node_ids=ids,
        parents=np.array(parents), stroke_of=np.array(stroke_of), ops=np.array(ops),
    )


def replay(approx: FreeSetApprox, index: int) -> ProtocolTrace:
    """Rebuild the stroke sequence producing ``approx.extreme_points[index]``."""
    if approx.parents is None or approx.config is None:
        raise InvalidParameter("explorer run was made without history")
    cfg = approx.config
    strokes = [_Stroke(cfg, s) for s in cfg.strokes]
    chain = []
    node = int(approx.node_ids[index])
    while node > 0:
        chain.append((int(approx.stroke_of[node]), int(approx.ops[node])))
        node = int(approx.parents[node])
    chain.reverse()
    p = cfg.start_state()
    channels = []
    for parity, op in chain:
        ch = strokes[parity].channel_for(p, op)
        channels.append(ch)
        p = ch.matrix @ p
    return run_protocol(cfg.start_state(), channels)
