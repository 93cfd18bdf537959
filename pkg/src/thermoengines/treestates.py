"""Tree-states: stationary states of repeated two-level drives on a spanning tree.

Each tree edge couples two levels of different energy and is driven with
alternating cold/hot swaps until the pair reaches the qubit-like limit
``gamma_tilde`` (cooling, lower level driven up) or ``Gamma_tilde``
(warming, upper level driven up).  Along the tree every population is fixed
by the edge ratios and the normalization.

Populations are computed without division: for a vertex ``v`` the weight is
the product, over all edges ``e``, of ``e``'s pair weight at the endpoint
lying on ``v``'s side of ``e``.  Sharp limits (a pair weight of exactly 0)
come out as exact zeros.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import COLD, HOT, QUBITS, GibbsContext, InvalidParameter, LevelSpec
from .engines import EngineKind
from .thermo import cone_extremes_batch
from .metrics import max_negativity

FB_TOL = 1e-12
FB_MAX_ROUNDS = 10_000


class DegenerateTreeState(InvalidParameter):
    """All weights vanish: conflicting sharp drives leave the limit undefined."""


@dataclass(frozen=True)
class CouplingGraph:
    energies: tuple[float, ...]
    edges: tuple[tuple[int, int], ...]
    hyperedges: tuple[tuple[int, ...], ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        for a, b in self.edges:
            if a == b:
                raise InvalidParameter(f"self-loop at {a}")
            if self.energies[a] == self.energies[b]:
                raise InvalidParameter(f"edge {a}-{b} joins levels of equal energy")

    @property
    def num_vertices(self) -> int:
        return len(self.energies)

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels else str(v)


def _norm_edge(a, b):
    return (a, b) if a < b else (b, a)


def coupling_graph(kind, levels: LevelSpec = QUBITS) -> CouplingGraph:
    """Allowed two-level couplings of an engine kind.

    Local kinds (separate qubits, LTOCC) couple levels differing in a single
    subsystem; ETO couples every pair of distinct energy.  For TO the graph
    additionally carries hyperedges: every subset of three or more levels
    spanning at least two energies.
    """
    kind = EngineKind.parse(kind)
    energies = levels.product_energies
    labels = levels.labels()
    n = len(energies)
    pairs = [(a, b) for a, b in itertools.combinations(range(n), 2) if energies[a] != energies[b]]
    if kind in (EngineKind.LTOCC2, EngineKind.SEPARATE_QUBITS):
        pairs = [(a, b) for a, b in pairs
                 if sum(x != y for x, y in zip(labels[a], labels[b])) == 1]
    elif kind not in (EngineKind.ETO, EngineKind.TO):
        raise InvalidParameter(f"no coupling graph for engine kind {kind.value!r}")
    hyper = ()
    if kind is EngineKind.TO:
        hyper = tuple(s for k in range(3, n + 1) for s in itertools.combinations(range(n), k)
                      if len({energies[i] for i in s}) > 1)
    return CouplingGraph(tuple(float(e) for e in energies), tuple(pairs), hyper, tuple(labels))


def _connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(n)}) == 1


def spanning_trees(graph: CouplingGraph | tuple[int, Sequence[tuple[int, int]]]) -> list[tuple[tuple[int, int], ...]]:
    """All spanning trees, by recursive contraction/deletion of edges.

    Accepts a :class:`CouplingGraph` or a ``(num_vertices, edges)`` pair.
    Trees are returned as sorted tuples of the original edges.
    """
    if isinstance(graph, CouplingGraph):
        n, edges = graph.num_vertices, list(graph.edges)
    else:
        n, edges = graph[0], [tuple(e) for e in graph[1]]
    if not _connected(n, edges):
        raise InvalidParameter("graph is disconnected; it has no spanning tree")
    out: list[tuple[tuple[int, int], ...]] = []

    # multigraph over merged vertex classes; each item is (u, v, original edge)
    def rec(items, n_classes, chosen):
        if n_classes == 1:
            out.append(tuple(sorted(chosen)))
            return
        items = [it for it in items if it[0] != it[1]]  # drop loops made by contraction
        if not items or not _connected_classes(items, n_classes):
            return
        u, v, orig = items[0]
        rest = items[1:]
        # contract: relabel v -> u
        contracted = [(u if a == v else a, u if b == v else b, o) for a, b, o in rest]
        rec(contracted, n_classes - 1, chosen + [orig])
        rec(rest, n_classes, chosen)

    def _connected_classes(items, n_classes):
        verts = {x for it in items for x in it[:2]}
        if len(verts) < n_classes:
            return False
        idx = {x: i for i, x in enumerate(verts)}
        return _connected(len(verts), [(idx[a], idx[b]) for a, b, _ in items])

    rec([(a, b, _norm_edge(a, b)) for a, b in edges], n, [])
    return sorted(out)


def extreme_pair(x: float, y: float) -> tuple[float, float]:
    """Lower-level population of the cooling and warming limits of a pair.

    ``x = exp(-beta_c dE)``, ``y = exp(-beta_h dE)``.  Returns
    ``(gamma_tilde, Gamma_tilde)`` with ``gamma_tilde = (1-x)/(1-xy)`` and
    ``Gamma_tilde = (1-y)/(1-xy)``; when ``xy = 1`` both collapse to the
    (common) Gibbs value.
    """
    den = 1.0 - x * y
    if den <= 0.0:
        g = 1.0 / (1.0 + x)
        return g, g
    return (1.0 - x) / den, (1.0 - y) / den


@dataclass(frozen=True)
class TreeStateSpec:
    """Spanning tree plus, per edge, the endpoint driven up.

    Hyperedges (level subsets) carry a bitstring naming the ``f^b`` state
    whose internal ratios they impose.
    """

    edges: tuple[tuple[int, int], ...]
    up: tuple[int, ...]
    num_vertices: int = 4
    hyperedges: tuple[tuple[int, ...], ...] = ()
    hyper_bits: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        edges = tuple(_norm_edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "up", tuple(int(u) for u in self.up))
        object.__setattr__(self, "hyperedges", tuple(tuple(sorted(h)) for h in self.hyperedges))
        object.__setattr__(self, "hyper_bits", tuple(tuple(int(b) for b in bits) for bits in self.hyper_bits))
        if len(self.up) != len(edges):
            raise InvalidParameter("one orientation per edge required")
        if any(u not in e for u, e in zip(self.up, edges)):
            raise InvalidParameter("orientation must name an endpoint of its edge")
        if len(self.hyper_bits) != len(self.hyperedges):
            raise InvalidParameter("one bitstring per hyperedge required")
        for h in self.hyperedges:
            if len(set(h)) != len(h) or len(h) < 2:
                raise InvalidParameter(f"bad hyperedge {h}")
        n = self.num_vertices
        rank = len(edges) + sum(len(h) - 1 for h in self.hyperedges)
        links = list(edges) + [(h[0], v) for h in self.hyperedges for v in h[1:]]
        if rank != n - 1 or not _connected(n, links):
            raise InvalidParameter("edges and hyperedges must form a spanning (hyper)tree")

    def source(self, i: int, energies) -> str:
        """'gamma' for a cooling edge (lower level driven up), else 'Gamma'."""
        a, b = self.edges[i]
        low = a if energies[a] < energies[b] else b
        return "gamma" if self.up[i] == low else "Gamma"


@dataclass(frozen=True, eq=False)
class TreeState:
    spec: TreeStateSpec
    population: np.ndarray


def _pair_weights(ctx: GibbsContext, a: int, b: int, up: int) -> dict[int, float]:
    e = ctx.levels.product_energies
    low, high = (a, b) if e[a] < e[b] else (b, a)
    gap = e[high] - e[low]
    x = math.exp(-ctx.betas.beta_c * gap)
    y = math.exp(-ctx.betas.beta_h * gap)
    gt, Gt = extreme_pair(x, y)
    lo_w = gt if up == low else Gt
    return {low: lo_w, high: 1.0 - lo_w}


def _side_products(n: int, factors: list[dict[int, float]]) -> np.ndarray:
    """Vertex weights from per-link endpoint weights on a (hyper)tree."""
    # adjacency over links; a link is a dict member -> weight
    incident: list[list[int]] = [[] for _ in range(n)]
    for k, f in enumerate(factors):
        for v in f:
            incident[v].append(k)
    w = np.ones(n)
    for v in range(n):
        # walk the tree from v; every link reached is entered through a member
        seen_links, stack, seen_v = set(), [v], {v}
        while stack:
            u = stack.pop()
            for k in incident[u]:
                if k in seen_links:
                    continue
                seen_links.add(k)
                w[v] *= factors[k][u]
                for t in factors[k]:
                    if t not in seen_v:
                        seen_v.add(t)
                        stack.append(t)
    return w


def _normalize(w: np.ndarray, spec) -> np.ndarray:
    s = w.sum()
    if s <= 0.0:
        raise DegenerateTreeState(f"conflicting sharp drives in {spec}")
    return w / s


def solve_tree_state(spec: TreeStateSpec, ctx: GibbsContext) -> TreeState:
    if spec.hyperedges:
        return solve_hypertree_state(spec, ctx)
    if spec.num_vertices != ctx.levels.dim:
        raise InvalidParameter("spec and context disagree on the number of levels")
    factors = [_pair_weights(ctx, a, b, u) for (a, b), u in zip(spec.edges, spec.up)]
    return TreeState(spec, _normalize(_side_products(spec.num_vertices, factors), spec))


def tree_specs(graph: CouplingGraph) -> list[TreeStateSpec]:
    """Every (spanning tree x orientation) of a coupling graph."""
    out = []
    for tree in spanning_trees(graph):
        for up in itertools.product(*tree):
            out.append(TreeStateSpec(tree, up, graph.num_vertices))
    return out


def tree_states(kind, ctx: GibbsContext, *, skip_degenerate: bool = True) -> list[TreeState]:
    graph = coupling_graph(kind, ctx.levels)
    out = []
    for spec in tree_specs(graph):
        try:
            out.append(solve_tree_state(spec, ctx))
        except DegenerateTreeState:
            if not skip_degenerate:
                raise
    return out


# closed forms, x = exp(-beta_c), y = exp(-beta_h), unit gap
def ltocc_max_p11(x: float, y: float) -> float:
    return (1 - x) ** 3 * y ** 2 / ((1 - x * y) * (1 + (x * x - 2 * x - 1) * y + y * y))


def ltocc_max_p00(x: float, y: float) -> float:
    return (1 - x) ** 3 * y / ((1 - x * y) * (y - 2 * x * y + x * x - x * x * y + x * x * y * y))


def eto_extra_p00(x: float, y: float) -> float:
    den = y * (1 - x) + 2 * x * x * (1 - y) - 2 * x * x * y * y + x * x * y ** 3 + x ** 3 * y ** 3
    return (1 - x) ** 2 * (1 + x) * y / den


def eto_max_p00(x: float, y: float) -> float:
    return max(ltocc_max_p00(x, y), eto_extra_p00(x, y))


def to_p11_lower_bound(x: float, y: float) -> float:
    """Closed-form lower bound on the TO-engine maximum of ``p11``."""
    return y * y * (1 - x * x) / (1 + 2 * x - x * x * y * y - 2 * x * y * y)


@dataclass(frozen=True)
class AnalyticBounds:
    max_p11: float
    max_p00: float
    max_negativity_lower_bound: float
    negativity_spec: TreeStateSpec | None = field(default=None, compare=False)


def analytic_bounds(kind, ctx: GibbsContext) -> AnalyticBounds:
    kind = EngineKind.parse(kind)
    if kind not in (EngineKind.LTOCC2, EngineKind.ETO):
        raise InvalidParameter("closed-form tree bounds exist for LTOCC2 and ETO only")
    if ctx.levels != QUBITS:
        raise InvalidParameter("closed-form tree bounds are for two qubits")
    x, y = ctx.betas.exp_c, ctx.betas.exp_h
    p11 = ltocc_max_p11(x, y)
    p00 = ltocc_max_p00(x, y) if kind is EngineKind.LTOCC2 else eto_max_p00(x, y)
    best, best_spec = 0.0, None
    for ts in tree_states(kind, ctx):
        n = max_negativity(ts.population)
        if n > best:
            best, best_spec = n, ts.spec
    return AnalyticBounds(p11, p00, best, best_spec)


def optimal_tree(kind, ctx: GibbsContext, metric) -> tuple[int, TreeState]:
    """Index (into :func:`tree_specs` order) and state maximizing ``metric``."""
    states = tree_states(kind, ctx, skip_degenerate=False)
    vals = [metric(s.population) for s in states]
    k = int(np.argmax(vals))
    return k, states[k]


# ---------------------------------------------------------------- f^b states

def _level_order(energies, subset) -> list[int]:
    # highest energy first; equal energies by descending index
    return sorted(subset, key=lambda i: (-energies[i], -i))


def _restricted_stroke(p, S, g, target, sign, g_next):
    """Best restricted cone extreme for one stroke (one-step lookahead)."""
    m = p[S].sum()
    if m <= 0.0:
        return p
    gs = g[S] / g[S].sum()
    E = cone_extremes_batch(p[S][None, :] / m, gs)[0]
    t = S.index(target)
    if g_next is None:
        score = sign * E[:, t]
    else:
        gn = g_next[S] / g_next[S].sum()
        score = sign * cone_extremes_batch(E, gn)[:, :, t].max(axis=1)
    q = p.copy()
    q[S] = E[int(np.argmax(score))] * m
    return q


def fb_state(bits: Sequence[int], ctx: GibbsContext, subset: Sequence[int] | None = None,
             start=None) -> np.ndarray:
    """Greedy far-from-equilibrium state ``f^b`` under joint-bath TO strokes.

    Levels are fixed one at a time from the top energy down.  While level
    ``l_k`` is being pushed up (bit 1) or down (bit 0), strokes alternate
    between the baths and act only on the levels not yet fixed; each stroke
    takes the future-cone extreme that is best for ``l_k`` after one further
    stroke at the other temperature.  A phase stops when a full cycle moves
    the state by less than ``FB_TOL``; the phase result is the best single
    stroke from that cycle state.  Bitstrings shorter than ``|subset|-1``
    fix only the top levels.

    With ``subset`` the construction runs on those levels with the Gibbs
    weights restricted and renormalized; the returned vector lives on the
    subset (in the order given) and sums to 1.
    """
    levels = ctx.levels
    n = levels.dim
    subset = list(range(n)) if subset is None else [int(i) for i in subset]
    if len(bits) > len(subset) - 1:
        raise InvalidParameter(f"bitstring of length {len(bits)} for {len(subset)} levels")
    g_c = ctx.weights(ctx.joint(COLD))[subset]
    g_h = ctx.weights(ctx.joint(HOT))[subset]
    g_c, g_h = g_c / g_c.sum(), g_h / g_h.sum()
    energies = levels.product_energies[subset]
    order = _level_order(energies, range(len(subset)))
    p = g_c.copy() if start is None else np.asarray(start, dtype=float).copy()
    for k, b in enumerate(bits):
        S = sorted(order[k:])
        target, sign = order[k], (1.0 if b else -1.0)
        for _ in range(FB_MAX_ROUNDS):
            old = p
            p = _restricted_stroke(p, S, g_h, target, sign, g_c)
            p = _restricted_stroke(p, S, g_c, target, sign, g_h)
            if np.max(np.abs(p - old)) < FB_TOL:
                break
        finals = [_restricted_stroke(p, S, g, target, sign, None) for g in (g_c, g_h)]
        p = max(finals, key=lambda q: sign * q[target])
    return p / p.sum()


def solve_hypertree_state(spec: TreeStateSpec, ctx: GibbsContext) -> TreeState:
    """Tree-state whose hyperedges impose ``f^b`` ratios on their members."""
    if spec.num_vertices != ctx.levels.dim:
        raise InvalidParameter("spec and context disagree on the number of levels")
    seen: dict[frozenset, int] = {}
    for h in spec.hyperedges:
        for pair in itertools.combinations(h, 2):
            if frozenset(pair) in seen:
                raise InvalidParameter(f"hyperedges overlap on {pair}")
            seen[frozenset(pair)] = 1
    factors = [_pair_weights(ctx, a, b, u) for (a, b), u in zip(spec.edges, spec.up)]
    for h, bits in zip(spec.hyperedges, spec.hyper_bits):
        f = fb_state(bits, ctx, subset=h)
        factors.append({v: float(w) for v, w in zip(h, f)})
    return TreeState(spec, _normalize(_side_products(spec.num_vertices, factors), spec))


def fb_bitstrings(n_levels: int = 4) -> list[tuple[int, ...]]:
    return list(itertools.product((0, 1), repeat=n_levels - 1))


def hypertree_specs(graph: CouplingGraph) -> list[TreeStateSpec]:
    """Spanning hypertrees using exactly one hyperedge, every orientation and bitstring.

    A hyperedge covering all levels gives back the plain ``f^b`` states and
    is skipped; the remaining levels are attached by ordinary edges.
    """
    n = graph.num_vertices
    out = []
    for h in graph.hyperedges:
        if len(h) == n:
            continue
        # contract h to its first vertex and span the quotient graph
        rep = {v: (h[0] if v in h else v) for v in range(n)}
        links = [(a, b) for a, b in graph.edges if not (a in h and b in h)]
        quot = [(rep[a], rep[b]) for a, b in links]
        verts = sorted(set(rep.values()))
        idx = {v: i for i, v in enumerate(verts)}
        qedges = [(idx[a], idx[b]) for a, b in quot]
        if not _connected(len(verts), qedges):
            continue
        for tree in _spanning_subsets(len(verts), qedges):
            chosen = tuple(links[k] for k in tree)
            for up in itertools.product(*chosen):
                for bits in fb_bitstrings(len(h)):
                    out.append(TreeStateSpec(chosen, up, n, (h,), (bits,)))
    return out


def _spanning_subsets(n: int, edges) -> list[tuple[int, ...]]:
    """Index sets of ``edges`` (parallel edges allowed) forming spanning trees."""
    return [ks for ks in itertools.combinations(range(len(edges)), n - 1)
            if _connected(n, [edges[k] for k in ks])]


def hypertree_states(ctx: GibbsContext, *, skip_degenerate: bool = True) -> list[TreeState]:
    out = []
    for spec in hypertree_specs(coupling_graph(EngineKind.TO, ctx.levels)):
        try:
            out.append(solve_hypertree_state(spec, ctx))
        except DegenerateTreeState:
            if not skip_degenerate:
                raise
    return out
