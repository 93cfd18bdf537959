"""Command line entry point: ``thermoengines <subcommand> ...``.

Subcommands: explore, sweep, tree-states, edges, metrics.  Every option can
also come from a JSON or TOML file given with ``--config``; flags given on
the command line win over the file.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import InvalidParameter, qubit_context
from .engines import EngineKind
from .explorer import ExplorerConfig, explore_free_set, replay
from .metrics import MetricKind, evaluate
from .sweep import (
    SWEEP_METRICS, ScalarGrid, SweepConfig, critical_exp_betas, detect_edges, read_rows,
    ridge_enrichment, ridge_hits, run_sweep, uniform_axis,
)
from .treestates import optimal_tree, tree_specs, coupling_graph

log = logging.getLogger("thermoengines")

_METRIC_FN = {
    "P_G": lambda p: float(p[0]),
    "P_E": lambda p: float(p[-1]),
    "N_max": lambda p: evaluate("max_negativity", p),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        if p.suffix.lower() == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:  # python < 3.11
                import tomli as tomllib
            return tomllib.loads(text)
        return json.loads(text)
    except Exception as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None


def _add_common(sp):
    sp.add_argument("--config", help="JSON or TOML file with default option values")
    sp.add_argument("--iters", type=int, default=200, help="max explorer iterations N")
    sp.add_argument("--eps", type=float, default=1e-7, help="relative volume tolerance")
    sp.add_argument("--delta", type=float, default=1e-5, help="dedup grid size")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="thermoengines", description="Two-bath thermal engine laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("explore", help="approximate one engine's free-state set")
    _add_common(sp)
    sp.add_argument("--engine", default="to")
    sp.add_argument("--exp-beta-c", type=float, required=False)
    sp.add_argument("--exp-beta-h", type=float, required=False)
    sp.add_argument("--asymmetric", action="store_true", help="LTOCC: subsystems at different baths")
    sp.add_argument("--rounds", type=int, help="LTOCC2 communication rounds")
    sp.add_argument("--traces", action="store_true", help="include a replayed protocol per extreme point")

    sp = sub.add_parser("sweep", help="explore every cell of a temperature grid")
    _add_common(sp)
    sp.add_argument("--engine", action="append", help="engine kind (repeatable or comma separated)")
    sp.add_argument("--grid", type=int, help="uniform grid size per axis")
    sp.add_argument("--grid-file", help="file with axis values, one per line")
    sp.add_argument("--metrics", help="comma separated subset of " + ",".join(SWEEP_METRICS))
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--random-cells", type=int, default=0)
    sp.add_argument("--mirror", action="store_true", help="fill exp_c > exp_h cells by transposition")

    sp = sub.add_parser("tree-states", help="optimal tree-state per grid cell")
    _add_common(sp)
    sp.add_argument("--engine", default="eto")
    sp.add_argument("--grid", type=int, default=32)
    sp.add_argument("--metric", default="P_G", choices=sorted(_METRIC_FN))

    sp = sub.add_parser("edges", help="double-Sobel ridges of a sweep metric")
    _add_common(sp)
    sp.add_argument("--input", required=False)
    sp.add_argument("--metric", default="P_E")
    sp.add_argument("--engine")
    sp.add_argument("--edge-mode", choices=("linear", "cubic", "average"), default="average")
    sp.add_argument("--edge-grid", type=int, default=512)
    sp.add_argument("--percentile", type=float, default=95.0)

    sp = sub.add_parser("metrics", help="evaluate metrics on states from CSV/JSON or --state")
    _add_common(sp)
    sp.add_argument("--input", help="CSV (p00,p01,p10,p11 columns or bare rows) or JSON list")
    sp.add_argument("--state", help="comma separated populations")
    sp.add_argument("--metric", action="append", help="metric kind (repeatable)")
    sp.add_argument("--exp-beta-c", type=float)
    sp.add_argument("--exp-beta-h", type=float)
    return ap


def _merge(args, parser, config: dict):
    """Config file values fill options left at their parser defaults."""
    sub = config.get(args.command, config)
    for key, val in sub.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if getattr(args, dest) == _default(parser, args.command, dest):
            setattr(args, dest, val)
    return args


def _default(parser, command, dest):
    for action in parser._subparsers._group_actions:
        sp = action.choices.get(command)
        if sp is not None:
            return sp.get_default(dest)
    return None


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _ctx(args):
    if args.exp_beta_c is None or args.exp_beta_h is None:
        raise UsageError("--exp-beta-c and --exp-beta-h are required")
    return qubit_context(args.exp_beta_c, args.exp_beta_h)


def cmd_explore(args) -> int:
    cfg = ExplorerConfig(args.engine, _ctx(args), max_iters=args.iters, volume_tol=args.eps,
                         dedup_tol=args.delta, asymmetric=args.asymmetric, rounds=args.rounds)
    approx = explore_free_set(cfg)
    doc = {
        "engine": cfg.kind.value, "exp_beta_c": args.exp_beta_c, "exp_beta_h": args.exp_beta_h,
        "iterations": approx.iterations_used, "converged": approx.converged,
        "convergence_mode": approx.convergence_mode, "volume": approx.volume,
        "extreme_points": approx.extreme_points.tolist(),
    }
    if args.traces:
        doc["traces"] = [[ch.label for ch in replay(approx, i).channels] for i in range(len(approx.extreme_points))]
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def _axis_from_file(path: str) -> list[float]:
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#")[0].strip()
        if line:
            vals.extend(float(v) for v in line.replace(",", " ").split())
    return vals


def _engines(args) -> list[str]:
    raw = args.engine or ["to"]
    if isinstance(raw, str):
        raw = [raw]
    return [e.strip() for item in raw for e in str(item).split(",") if e.strip()]


def cmd_sweep(args) -> int:
    if args.grid_file:
        axis = _axis_from_file(args.grid_file)
    elif args.grid:
        axis = uniform_axis(args.grid).tolist()
    else:
        raise UsageError("sweep needs --grid or --grid-file")
    metrics = args.metrics.split(",") if args.metrics else list(SWEEP_METRICS)
    cfg = SweepConfig(axis, axis, _engines(args), metrics, args.iters, args.eps, args.delta,
                      args.workers, args.seed, None, args.format, args.random_cells, args.mirror)
    records = run_sweep(cfg)
    if args.out:
        from .sweep import write_records
        write_records(records, args.out, cfg.metrics, cfg.fmt)
    else:
        from .sweep import record_rows
        rows = record_rows(records, cfg.metrics)
        if args.format == "json":
            sys.stdout.write(json.dumps(rows, indent=1) + "\n")
        else:
            w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    failed = sum(r.error is not None for r in records)
    if failed:
        log.warning("%d cells failed; see log", failed)
    return 0


def cmd_tree_states(args) -> int:
    axis = uniform_axis(args.grid)
    specs = tree_specs(coupling_graph(args.engine))
    fn = _METRIC_FN[args.metric]
    rows = []
    for xc in axis:
        for xh in axis:
            k, ts = optimal_tree(args.engine, qubit_context(xc, xh), fn)
            rows.append({"exp_beta_c": repr(float(xc)), "exp_beta_h": repr(float(xh)),
                         "engine": EngineKind.parse(args.engine).value, "metric": args.metric,
                         "spec_id": k, "value": repr(fn(ts.population)),
                         "edges": ";".join(f"{a}-{b}>{u}" for (a, b), u in zip(specs[k].edges, specs[k].up))})
    _write_rows(rows, args)
    return 0


def _write_rows(rows, args):
    if args.format == "json":
        _emit(json.dumps(rows, indent=1) + "\n", args.out)
        return
    import io
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _emit(buf.getvalue(), args.out)


def cmd_edges(args) -> int:
    if not args.input:
        raise UsageError("edges needs --input")
    rows = read_rows(args.input)
    grid = ScalarGrid.from_rows(rows, args.metric, args.engine)
    res = detect_edges(grid, args.edge_mode, args.edge_grid, args.percentile)
    crit = critical_exp_betas()
    doc = {
        "metric": args.metric, "engine": args.engine, "interpolation": args.edge_mode,
        "fine_grid": args.edge_grid, "percentile": res.percentile, "threshold": res.threshold,
        "threshold_note": res.note,
        "critical_exp_betas": [{"value": c, "ridge_cells_within_1e-2": ridge_hits(res, c),
                                "enrichment": ridge_enrichment(res, c)} for c in crit],
        "ridge_cells": res.cells,
    }
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def _read_states(args) -> list[np.ndarray]:
    if args.state:
        return [np.array([float(v) for v in args.state.split(",")])]
    if not args.input:
        raise UsageError("metrics needs --state or --input")
    text = Path(args.input).read_text()
    if text.lstrip().startswith(("[", "{")):
        data = json.loads(text)
        if isinstance(data, dict):
            data = data.get("states") or data.get("extreme_points") or [data]
        out = []
        for item in data:
            if isinstance(item, dict):
                item = [item[k] for k in ("p00", "p01", "p10", "p11")]
            out.append(np.array(item, dtype=float))
        return out
    lines = [l for l in text.splitlines() if l.strip()]
    if lines and any(c.isalpha() for c in lines[0]):
        return [np.array([float(r[k]) for k in ("p00", "p01", "p10", "p11")])
                for r in csv.DictReader(lines)]
    return [np.array([float(v) for v in l.split(",")]) for l in lines]


def cmd_metrics(args) -> int:
    kinds = [MetricKind.parse(m) for m in (args.metric or ["ground_pop", "excited_pop", "max_negativity"])]
    ctx = None
    if any(k.needs_context for k in kinds):
        ctx = _ctx(args)
    rows = []
    for i, p in enumerate(_read_states(args)):
        row = {"state": i}
        for k in kinds:
            row[k.value] = repr(evaluate(k, p, ctx))
        rows.append(row)
    _write_rows(rows, args)
    return 0


COMMANDS = {"explore": cmd_explore, "sweep": cmd_sweep, "tree-states": cmd_tree_states,
            "edges": cmd_edges, "metrics": cmd_metrics}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        args = _merge(args, parser, _load_config(args.config))
    except UsageError as exc:
        print(f"thermoengines: usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"thermoengines: usage error: {exc}", file=sys.stderr)
        return 2
    except (InvalidParameter, ValueError) as exc:
        print(f"thermoengines: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"thermoengines: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
