"""Containment chain and tree-state membership on a uniform grid.

Usage: python scripts/containment_grid.py [--n 8] [--iters 200] [--delta 1e-5] [--eps 1e-7]
"""
import argparse
import time

import numpy as np

from thermoengines.core import qubit_context
from thermoengines.explorer import ExplorerConfig, explore_free_set, hull_distances
from thermoengines.sweep import uniform_axis
from thermoengines.treestates import fb_bitstrings, fb_state, hypertree_states, tree_states

CHAIN = ("separate", "ltocc1", "ltocc2", "eto", "to", "slto")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--delta", type=float, default=1e-5)
    ap.add_argument("--eps", type=float, default=1e-7)
    a = ap.parse_args()
    ax = uniform_axis(a.n)
    t0 = time.time()
    for i, xc in enumerate(ax):
        for xh in ax[i + 1:]:
            ctx = qubit_context(xc, xh)
            t = time.time()
            H = {k: explore_free_set(ExplorerConfig(k, ctx, max_iters=a.iters, dedup_tol=a.delta,
                                                    volume_tol=a.eps)).extreme_points for k in CHAIN}
            chain = [hull_distances(H[s], H[b]).max() for s, b in zip(CHAIN, CHAIN[1:])]
            trees = [
                hull_distances(np.array([s.population for s in tree_states("ltocc2", ctx)]), H["ltocc2"]).max(),
                hull_distances(np.array([s.population for s in tree_states("eto", ctx)]), H["eto"]).max(),
                hull_distances(np.array([s.population for s in hypertree_states(ctx)]), H["to"]).max(),
                hull_distances(np.array([fb_state(b, ctx) for b in fb_bitstrings()]), H["to"]).max(),
            ]
            print(f"{xc:.4f} {xh:.4f}  chain " + " ".join(f"{d:.1e}" for d in chain)
                  + "  trees " + " ".join(f"{d:.1e}" for d in trees) + f"  {time.time() - t:.1f}s", flush=True)
    print(f"total {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
