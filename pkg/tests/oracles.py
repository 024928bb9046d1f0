"""Independent reference computations used to freeze expected values in tests.

Everything here uses plain loops or scipy, never the package's own solvers.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def matrix_game_2x2(M) -> float:
    """Closed-form value of a 2x2 zero-sum game (row player maximizes)."""
    (a, b), (c, d) = np.asarray(M, dtype=float)
    lower = max(min(a, b), min(c, d))
    upper = min(max(a, c), max(b, d))
    if abs(lower - upper) <= 1e-12:
        return lower  # pure saddle point
    return (a * d - b * c) / (a + d - b - c)


def matrix_game_scipy(M) -> float:
    """Value via HiGHS: max v s.t. p^T M >= v, p in simplex."""
    M = np.asarray(M, dtype=float)
    nA, nB = M.shape
    c = np.zeros(nA + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-M.T, np.ones((nB, 1))])
    A_eq = np.hstack([np.ones((1, nA)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(nB), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * nA + [(None, None)], method="highs")
    return float(-res.fun)


def pair_value_loops(P, r, mu, nu, s0) -> float:
    """Backward induction with explicit loops; P may include extra (absorbing) states."""
    H, n, A, B, _ = P.shape
    S = r.shape[1]
    V = np.zeros(n)
    for h in reversed(range(H)):
        newV = np.zeros(n)
        for s in range(n):
            for a in range(A):
                for b in range(B):
                    pa = mu[h, s, a] if s < S else 1.0 / A
                    pb = nu[h, s, b] if s < S else 1.0 / B
                    rew = r[h, s, a, b] if s < S else 0.0
                    newV[s] += pa * pb * (rew + P[h, s, a, b] @ V)
        V = newV
    return float(V[s0])


def deterministic_policies(H, S, n_actions):
    """All deterministic Markov policies as one-hot arrays (H, S, n_actions)."""
    for acts in itertools.product(range(n_actions), repeat=H * S):
        d = np.zeros((H, S, n_actions))
        d[np.repeat(np.arange(H), S), np.tile(np.arange(S), H), acts] = 1.0
        yield d


def best_response_enum(P, r, mu, s0) -> float:
    """Min over deterministic min-player policies, by enumeration."""
    H, S, A, B = r.shape
    return min(pair_value_loops(P, r, mu, nu, s0) for nu in deterministic_policies(H, S, B))


def grid_simplex(n, res):
    """All points of the n-simplex with coordinates in multiples of 1/res."""
    for c in itertools.product(range(res + 1), repeat=n - 1):
        if sum(c) <= res:
            yield np.array(list(c) + [res - sum(c)], dtype=float) / res


def design_grid_optimum(D, res=200) -> float:
    """Brute-force ``min_lam max_i sum_x D[i,x] / (lam @ D)[x]`` over a lam grid."""
    D = np.asarray(D, dtype=float)
    D = D[:, D.sum(axis=0) > 0]
    k = D.shape[0]
    lams = np.array(list(grid_simplex(k, res)))
    best = np.inf
    for chunk in np.array_split(lams, max(1, len(lams) // 20000)):
        dl = chunk @ D  # (g, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(D[None] > 0, D[None] / dl[:, None, :], 0.0)
        best = min(best, float(ratio.sum(-1).max(-1).min()))
    return best
