"""Independent reference computations used by the tests (LPs, rational arithmetic)."""
import itertools
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog


def _gp_constraints(p, g):
    """Equality system for a column-stochastic M with M g = g; unknowns M.ravel()."""
    d = len(g)
    rows, rhs = [], []
    for j in range(d):  # columns sum to one
        r = np.zeros((d, d)); r[:, j] = 1; rows.append(r.ravel()); rhs.append(1.0)
    for i in range(d):  # Gibbs preserved
        r = np.zeros((d, d)); r[i, :] = g; rows.append(r.ravel()); rhs.append(g[i])
    return rows, rhs


def lp_majorizes(p, q, g) -> bool:
    """p thermo-majorizes q iff a Gibbs-preserving stochastic map sends p to q."""
    d = len(g)
    rows, rhs = _gp_constraints(p, g)
    for i in range(d):
        r = np.zeros((d, d)); r[i, :] = p; rows.append(r.ravel()); rhs.append(q[i])
    res = linprog(np.zeros(d * d), A_eq=np.array(rows), b_eq=np.array(rhs), bounds=(0, 1), method="highs")
    return res.status == 0


def lp_cone_max(p, g, c) -> float:
    """max c.q over the future cone of p, by LP over Gibbs-preserving maps."""
    d = len(g)
    rows, rhs = _gp_constraints(p, g)
    obj = -np.einsum("i,j->ij", c, p).ravel()
    res = linprog(obj, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=(0, 1), method="highs")
    assert res.status == 0
    return -res.fun


def lp_hull_distance_inf(x, V) -> float:
    """Smallest sup-norm distance from x to conv(V), by LP."""
    V = np.asarray(V); n, d = V.shape
    # variables: lambda (n), t
    c = np.zeros(n + 1); c[-1] = 1
    A_ub, b_ub = [], []
    for i in range(d):
        r = np.zeros(n + 1); r[:n] = V[:, i]; r[-1] = -1; A_ub.append(r); b_ub.append(x[i])
        r = np.zeros(n + 1); r[:n] = -V[:, i]; r[-1] = -1; A_ub.append(r); b_ub.append(-x[i])
    A_eq = [np.r_[np.ones(n), 0]]
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=[1],
                  bounds=[(0, None)] * n + [(0, None)], method="highs")
    return res.fun


def frac_swap(r):
    """Qubit thermal swap with a rational ratio."""
    return [[1 - r, Fraction(1)], [r, Fraction(0)]]


def frac_kron(a, b):
    return [[a[i // 2][k // 2] * b[i % 2][k % 2] for k in range(4)] for i in range(4)]


def frac_matmul(a, b):
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def frac_matvec(a, v):
    return [sum(a[i][k] * v[k] for k in range(len(v))) for i in range(len(a))]


def rational_stationary(M):
    """Stationary vector of a column-stochastic rational matrix by exact elimination."""
    n = len(M)
    A = [[M[i][j] - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    A[-1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * c for a, c in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return [b[i] / A[i][i] for i in range(n)]


def brute_spanning_trees(n, edges):
    out = []
    for ks in itertools.combinations(range(len(edges)), n - 1):
        parent = list(range(n))

        def find(i):
            while parent[i] != i:
                i = parent[i]
            return i
        ok = True
        for k in ks:
            a, b = find(edges[k][0]), find(edges[k][1])
            if a == b:
                ok = False; break
            parent[a] = b
        if ok:
            out.append(tuple(sorted(tuple(sorted(edges[k])) for k in ks)))
    return sorted(out)


def kirchhoff_count(n, edges) -> int:
    L = np.zeros((n, n))
    for a, b in edges:
        L[a, a] += 1; L[b, b] += 1; L[a, b] -= 1; L[b, a] -= 1
    return int(round(np.linalg.det(L[1:, 1:])))


def frac_solve(A, b):
    """Exact solution of a square rational linear system (Gauss-Jordan)."""
    n = len(A)
    A = [list(map(Fraction, row)) for row in A]
    b = list(map(Fraction, b))
    for col in range(n):
        piv = next(r for r in range(col, n) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * c for a, c in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return [b[i] / A[i][i] for i in range(n)]


def negativity_after_block_unitary(p, theta, phi):
    """Negativity of U diag(p) U^dag with U a rotation on span{01, 10}."""
    U = np.eye(4, dtype=complex)
    c, s = np.cos(theta), np.sin(theta)
    U[1, 1], U[1, 2] = c, -np.exp(1j * phi) * s
    U[2, 1], U[2, 2] = np.exp(-1j * phi) * s, c
    rho = U @ np.diag(p) @ U.conj().T
    pt = rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    w = np.linalg.eigvalsh(pt)
    return float(-w[w < 0].sum())


def numeric_max_negativity(p) -> float:
    from scipy.optimize import minimize
    best = 0.0
    for t0 in np.linspace(0, np.pi, 9):
        res = minimize(lambda v: -negativity_after_block_unitary(p, v[0], v[1]), [t0, 0.3],
                       method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13})
        best = max(best, -res.fun)
    return best
