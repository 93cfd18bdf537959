"""TO excited-population sweep and double-Sobel ridge check against the critical values.

Usage: python scripts/to_ridges.py [--n 64] [--iters 40] [--delta 1e-4] [--out to_pe.csv]
"""
import argparse
import time

from thermoengines.sweep import (
    ScalarGrid, SweepConfig, critical_exp_betas, detect_edges, record_rows, ridge_enrichment,
    ridge_hits, run_sweep, uniform_axis, write_records,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--iters", type=int, default=40)
    ap.add_argument("--delta", type=float, default=1e-4)
    ap.add_argument("--fine", type=int, default=512)
    ap.add_argument("--out", default=None)
    a = ap.parse_args()
    ax = uniform_axis(a.n)
    t = time.time()
    cfg = SweepConfig(ax, ax, engines=["to"], metrics=["P_E"], max_iters=a.iters,
                      dedup_tol=a.delta, mirror=True)
    recs = run_sweep(cfg)
    print(f"sweep {a.n}x{a.n}: {time.time() - t:.1f}s")
    if a.out:
        write_records(recs, a.out, ["P_E"])
    grid = ScalarGrid.from_rows(record_rows(recs, ["P_E"]), "P_E", "to")
    edges = detect_edges(grid, fine=a.fine)
    for v in critical_exp_betas():
        print(f"e^-beta = {v:.12f}: ridge cells within 1e-2 = {ridge_hits(edges, v)}, "
              f"enrichment = {ridge_enrichment(edges, v):.2f}")


if __name__ == "__main__":
    main()
