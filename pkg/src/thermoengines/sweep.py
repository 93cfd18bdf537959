"""Temperature-grid sweeps, figure data and ridge detection on scalar grids.

Grids are indexed ``values[i, j]`` with ``i`` running over ``exp(-beta_c)``
and ``j`` over ``exp(-beta_h)``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .core import InvalidParameter, qubit_context
from .engines import EngineKind
from .explorer import ExplorerConfig, explore_free_set
from .metrics import UndefinedAdvantage, excited_pop, free_advantage, ground_pop, max_negativity

log = logging.getLogger(__name__)

CSV_COLUMNS = ("exp_beta_c", "exp_beta_h", "engine", "metric", "value", "converged", "iterations")
SWEEP_METRICS = ("P_G", "P_E", "N_max", "Af_P_G", "Af_P_E")
WORKERS_ENV = "THERMO_ENGINE_WORKERS"
# the edge threshold is a stand-in for visual identification of ridges
EDGE_THRESHOLD_NOTE = "percentile threshold (stand-in for visual edge identification)"


def uniform_axis(n: int, lo: float | None = None, hi: float = 1.0) -> np.ndarray:
    """``n`` cell centres spread uniformly over ``(0, 1]``."""
    if n < 1:
        raise InvalidParameter("grid size must be positive")
    if lo is None:
        return (np.arange(n) + 0.5) / n * hi
    return np.linspace(lo, hi, n)


@dataclass
class SweepConfig:
    exp_c: Sequence[float]
    exp_h: Sequence[float]
    engines: Sequence[str] = ("to",)
    metrics: Sequence[str] = SWEEP_METRICS
    max_iters: int = 200
    volume_tol: float = 1e-7
    dedup_tol: float = 1e-5
    workers: int = 1
    seed: int = 0
    out: str | None = None
    fmt: str = "csv"
    random_cells: int = 0  # > 0: sample this many cells uniformly instead of the grid
    mirror: bool = False  # fill exp_c > exp_h cells from their transposes (symmetric kinds)

    def __post_init__(self):
        self.exp_c = [float(v) for v in self.exp_c]
        self.exp_h = [float(v) for v in self.exp_h]
        for v in itertools.chain(self.exp_c, self.exp_h):
            if not 0.0 < v <= 1.0:
                raise InvalidParameter(f"axis value {v} outside (0, 1]")
        if not self.exp_c or not self.exp_h:
            raise InvalidParameter("empty grid axis")
        self.engines = [EngineKind.parse(e).value for e in self.engines]
        if not self.engines:
            raise InvalidParameter("no engine kinds selected")
        unknown = set(self.metrics) - set(SWEEP_METRICS)
        if unknown or not self.metrics:
            raise InvalidParameter(f"unknown or empty metric selection: {sorted(unknown)}")
        self.metrics = [m for m in SWEEP_METRICS if m in self.metrics]
        if self.fmt not in ("csv", "json"):
            raise InvalidParameter("format must be csv or json")

    def cells(self) -> list[tuple[float, float]]:
        if self.random_cells > 0:
            rng = np.random.default_rng(self.seed)
            pts = rng.uniform(0.0, 1.0, size=(self.random_cells, 2))
            pts = np.clip(pts, 1e-12, 1.0)
            return [(float(a), float(b)) for a, b in pts]
        return [(c, h) for c in self.exp_c for h in self.exp_h]

    def worker_count(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise InvalidParameter(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        return max(1, int(self.workers))


@dataclass
class GridRecord:
    exp_beta_c: float
    exp_beta_h: float
    engine: str
    values: dict[str, float]
    converged: bool
    iterations: int
    wall_time: float = 0.0
    error: str | None = None


def cell_metrics(points: np.ndarray, ctx) -> dict[str, float]:
    """Sweep metrics from the extreme points of one explored hull."""
    pg = max(ground_pop(p) for p in points)
    pe = max(excited_pop(p) for p in points)
    # negativity is convex in p, so its maximum over the hull sits on a vertex
    nm = max(max_negativity(p) for p in points)
    ref_g = ground_pop(ctx.weights(ctx.joint("c")))
    ref_e = excited_pop(ctx.weights(ctx.joint("h")))
    out = {"P_G": pg, "P_E": pe, "N_max": nm}
    for name, val, ref in (("Af_P_G", pg, ref_g), ("Af_P_E", pe, ref_e)):
        try:
            out[name] = free_advantage(np.array([val, 0, 0, 1 - val]) if name == "Af_P_G"
                                       else np.array([1 - val, 0, 0, val]),
                                       "ground_pop" if name == "Af_P_G" else "excited_pop", ref)
        except UndefinedAdvantage:
            out[name] = math.nan
    return out


def run_cell(args) -> GridRecord:
    (xc, xh), kind, cfg = args
    t0 = time.perf_counter()
    try:
        ctx = qubit_context(xc, xh)
        approx = explore_free_set(ExplorerConfig(kind, ctx, max_iters=cfg.max_iters,
                                                 volume_tol=cfg.volume_tol, dedup_tol=cfg.dedup_tol))
        vals = cell_metrics(approx.extreme_points, ctx)
        rec = GridRecord(xc, xh, kind, vals, approx.converged, approx.iterations_used)
    except Exception as exc:  # a failing cell is recorded, the sweep goes on
        log.warning("cell (%g, %g) %s failed: %s", xc, xh, kind, exc)
        rec = GridRecord(xc, xh, kind, {m: math.nan for m in SWEEP_METRICS}, False, 0,
                         error=f"{type(exc).__name__}: {exc}")
    rec.wall_time = time.perf_counter() - t0
    return rec


def run_sweep(cfg: SweepConfig) -> list[GridRecord]:
    cells = cfg.cells()
    todo = cells
    if cfg.mirror:
        todo = [(c, h) for c, h in cells if c <= h]
    jobs = [(cell, kind, cfg) for kind in cfg.engines for cell in todo]
    workers = cfg.worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(run_cell, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        done = [run_cell(j) for j in jobs]
    by_key = {(r.engine, r.exp_beta_c, r.exp_beta_h): r for r in done}
    records = []
    for kind in cfg.engines:
        for c, h in cells:
            r = by_key.get((kind, c, h))
            if r is None:  # mirrored cell
                src = by_key[(kind, h, c)]
                r = GridRecord(c, h, kind, dict(src.values), src.converged, src.iterations, 0.0, src.error)
            records.append(r)
    if cfg.out:
        write_records(records, cfg.out, cfg.metrics, cfg.fmt)
    return records


def _fmt(v: float) -> str:
    return "nan" if not math.isfinite(v) else repr(float(v))


def record_rows(records: Sequence[GridRecord], metrics: Sequence[str] = SWEEP_METRICS) -> list[dict]:
    rows = []
    for r in records:
        for m in metrics:
            rows.append({"exp_beta_c": repr(float(r.exp_beta_c)), "exp_beta_h": repr(float(r.exp_beta_h)),
                         "engine": r.engine, "metric": m, "value": _fmt(r.values.get(m, math.nan)),
                         "converged": str(bool(r.converged)).lower(), "iterations": str(r.iterations)})
    return rows


def write_records(records, path: str, metrics=SWEEP_METRICS, fmt: str = "csv") -> None:
    rows = record_rows(records, metrics)
    with open(path, "w", newline="") as fh:
        if fmt == "json":
            json.dump(rows, fh, indent=1)
            fh.write("\n")
        else:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)


def read_rows(path: str) -> list[dict]:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------- scalar grids

@dataclass(eq=False)
class ScalarGrid:
    values: np.ndarray
    exp_c: np.ndarray
    exp_h: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.exp_c = np.asarray(self.exp_c, dtype=float)
        self.exp_h = np.asarray(self.exp_h, dtype=float)
        if self.values.shape != (self.exp_c.size, self.exp_h.size):
            raise InvalidParameter(f"grid shape {self.values.shape} does not match axes "
                                   f"({self.exp_c.size}, {self.exp_h.size})")

    @classmethod
    def from_rows(cls, rows, metric: str, engine: str | None = None) -> "ScalarGrid":
        sel = [r for r in rows if r["metric"] == metric and (engine is None or r["engine"] == engine)]
        if not sel:
            raise InvalidParameter(f"no rows for metric {metric!r}")
        xs = sorted({float(r["exp_beta_c"]) for r in sel})
        ys = sorted({float(r["exp_beta_h"]) for r in sel})
        ix = {v: i for i, v in enumerate(xs)}
        iy = {v: j for j, v in enumerate(ys)}
        vals = np.full((len(xs), len(ys)), np.nan)
        for r in sel:
            vals[ix[float(r["exp_beta_c"])], iy[float(r["exp_beta_h"])]] = float(r["value"])
        return cls(vals, xs, ys, {"metric": metric, "engine": engine})

    def interpolate(self, shape: int | tuple[int, int], mode: str = "linear") -> "ScalarGrid":
        """Resample onto a regular grid spanning the same axis range.

        ``cubic`` is a separable natural cubic spline; ``average`` is the mean
        of the linear and cubic resamplings.
        """
        if isinstance(shape, int):
            shape = (shape, shape)
        xs = np.linspace(self.exp_c[0], self.exp_c[-1], shape[0])
        ys = np.linspace(self.exp_h[0], self.exp_h[-1], shape[1])
        vals = np.nan_to_num(self.values, nan=float(np.nanmean(self.values)) if np.isfinite(self.values).any() else 0.0)
        if mode == "linear":
            out = _linear(vals, self.exp_c, self.exp_h, xs, ys)
        elif mode == "cubic":
            out = _cubic(vals, self.exp_c, self.exp_h, xs, ys)
        elif mode == "average":
            out = 0.5 * (_linear(vals, self.exp_c, self.exp_h, xs, ys) + _cubic(vals, self.exp_c, self.exp_h, xs, ys))
        else:
            raise InvalidParameter(f"unknown interpolation mode {mode!r}")
        return ScalarGrid(out, xs, ys, dict(self.meta, interpolation=mode))


def _linear(vals, x, y, xs, ys):
    if x.size < 2 or y.size < 2:
        raise InvalidParameter("interpolation needs at least two points per axis")
    f = RegularGridInterpolator((x, y), vals, method="linear")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return f(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(X.shape)


def _cubic(vals, x, y, xs, ys):
    if x.size < 2 or y.size < 2:
        raise InvalidParameter("interpolation needs at least two points per axis")
    tmp = CubicSpline(x, vals, axis=0, bc_type="natural")(xs)
    return CubicSpline(y, tmp, axis=1, bc_type="natural")(ys)


def _spacing(axis: np.ndarray) -> float:
    return float(axis[1] - axis[0]) if axis.size > 1 else 1.0


def sobel(grid: ScalarGrid) -> ScalarGrid:
    """Gradient magnitude from the 3x3 Sobel kernels, replicate padding.

    The kernels are scaled by ``1 / (8 h)`` so a unit-slope ramp gives 1.
    """
    if min(grid.values.shape) < 3:
        raise InvalidParameter("Sobel filtering needs a grid of at least 3x3")
    v = grid.values
    gx = ndimage.sobel(v, axis=0, mode="nearest") / (8.0 * _spacing(grid.exp_c))
    gy = ndimage.sobel(v, axis=1, mode="nearest") / (8.0 * _spacing(grid.exp_h))
    return ScalarGrid(np.hypot(gx, gy), grid.exp_c, grid.exp_h, dict(grid.meta, filter="sobel"))


def double_sobel(grid: ScalarGrid) -> ScalarGrid:
    out = sobel(sobel(grid))
    out.meta["filter"] = "double_sobel"
    return out


@dataclass
class EdgeResult:
    cells: list[tuple[float, float]]
    threshold: float
    percentile: float
    field: ScalarGrid
    note: str = EDGE_THRESHOLD_NOTE


def detect_edges(grid: ScalarGrid, mode: str = "average", fine: int = 512,
                 percentile: float = 95.0) -> EdgeResult:
    """Ridge cells of ``double_sobel`` on an interpolated grid.

    Cells whose double-Sobel value reaches the given percentile are reported
    as ``(exp_c, exp_h)`` coordinates.  ``fine <= 0`` skips interpolation.
    """
    g = grid.interpolate(fine, mode) if fine and fine > 0 else grid
    d = double_sobel(g)
    thr = float(np.percentile(d.values, percentile))
    # a flat field has no ridges even when the percentile lands on zero
    ii, jj = np.nonzero((d.values >= thr) & (d.values > 0))
    cells = [(float(d.exp_c[i]), float(d.exp_h[j])) for i, j in zip(ii, jj)]
    return EdgeResult(cells, thr, percentile, d)


def ridge_hits(edges: EdgeResult, value: float, radius: float = 1e-2) -> int:
    """Number of ridge cells with either coordinate within ``radius`` of ``value``."""
    return int(sum(abs(c - value) <= radius or abs(h - value) <= radius for c, h in edges.cells))


def ridge_enrichment(edges: EdgeResult, value: float, radius: float = 1e-2) -> float:
    """Ridge density near ``value`` relative to the density over the whole grid.

    Values well above 1 mean ridges concentrate along the critical lines.
    """
    if not edges.cells:
        return 0.0
    X, Y = np.meshgrid(edges.field.exp_c, edges.field.exp_h, indexing="ij")
    band = (np.abs(X - value) <= radius) | (np.abs(Y - value) <= radius)
    if not band.any():
        return 0.0
    hits = ridge_hits(edges, value, radius)
    return float((hits / band.sum()) / (len(edges.cells) / band.size))


# ---------------------------------------------------------------- critical points

def _subset_sum_polys(n_levels_weights=((0,), (1,), (1,), (2,))):
    """Distinct subset-sum differences as polynomials in ``t = exp(-beta)``.

    Each level contributes ``t**k`` with ``k`` its energy; returns coefficient
    vectors (ascending powers) of ``sum(A) - sum(B)`` for every pair of
    subsets that are not identical as energy multisets.
    """
    energies = [k[0] for k in n_levels_weights]
    kmax = max(energies)
    subsets = []
    for r in range(1, len(energies) + 1):
        for comb in itertools.combinations(range(len(energies)), r):
            c = np.zeros(kmax + 1)
            for i in comb:
                c[energies[i]] += 1
            subsets.append(c)
    polys = {}
    for a, b in itertools.combinations(subsets, 2):
        d = a - b
        if np.any(d):
            key = tuple(d) if next(x for x in d if x) > 0 else tuple(-d)
            polys[key] = np.array(key)
    return list(polys.values())


def critical_exp_betas(tol: float = 1e-10, scan: int = 2001, energies=(0, 1, 1, 2)) -> list[float]:
    """Values of ``exp(-beta)`` in ``(0, 1)`` where the ordering of Gibbs subset sums changes.

    Sign changes of every subset-sum difference are bracketed on a scan
    grid and refined by bisection to ``tol``.
    """
    roots: list[float] = []
    ts = np.linspace(0.0, 1.0, scan)[1:-1]
    for c in _subset_sum_polys(tuple((e,) for e in energies)):
        f = np.polynomial.polynomial.Polynomial(c)
        vals = f(ts)
        for k in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            lo, hi = ts[k], ts[k + 1]
            flo = f(lo)
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = f(mid)
                if np.sign(fm) == np.sign(flo):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
        for k in np.nonzero(vals == 0)[0]:
            roots.append(float(ts[k]))
    roots.sort()
    out: list[float] = []
    for r in roots:
        if not out or r - out[-1] > 10 * tol:
            out.append(r)
    return out
