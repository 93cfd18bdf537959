"""Distance of LTOCC2 tree states from the explored LTOCC2 hull versus explorer settings.

Tree states are limits of infinitely repeated strokes, so the explored hull
approaches them geometrically; this prints the gap for a few settings.
"""
import time

from thermoengines.core import qubit_context
from thermoengines.explorer import ExplorerConfig, explore_free_set, hull_distances
from thermoengines.treestates import tree_states

import numpy as np

SETTINGS = [(200, 1e-5, 1e-7), (1000, 1e-6, 1e-7), (1000, 1e-7, 1e-9)]
CELLS = [(0.0625, 0.1875), (0.1, 0.2), (0.5, 0.6), (0.7, 0.95)]


def main():
    for xc, xh in CELLS:
        ctx = qubit_context(xc, xh)
        trees = np.array([s.population for s in tree_states("ltocc2", ctx)])
        for n, delta, eps in SETTINGS:
            t = time.time()
            A = explore_free_set(ExplorerConfig("ltocc2", ctx, max_iters=n, dedup_tol=delta, volume_tol=eps))
            gap = hull_distances(trees, A.extreme_points).max()
            print(f"({xc}, {xh}) N={n} delta={delta:g} eps={eps:g}: {A.iterations_used} iters, "
                  f"converged={A.converged}, gap {gap:.2e}, {time.time() - t:.1f}s", flush=True)


if __name__ == "__main__":
    main()
