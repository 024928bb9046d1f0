"""Dense two-phase tableau simplex for the small LPs used in this package.

Solves::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Bland's rule is used for both the entering and the leaving variable, which
rules out cycling on the degenerate problems matrix games produce.  The first
optimal basic solution reached is returned, so ties are broken
deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError


@dataclass(frozen=True, eq=False)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    value: float | None
    duals_ub: np.ndarray | None
    n_pivots: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _iterate(T, basis, allowed, tol, max_iter):
    """Run simplex pivots on tableau ``T`` (last row = reduced costs)."""
    m = T.shape[0] - 1
    pivots = 0
    while True:
        red = T[-1, :-1]
        cand = np.flatnonzero((red < -tol) & allowed)
        if cand.size == 0:
            return "optimal", pivots
        col = cand[0]
        column = T[:m, col]
        pos = np.flatnonzero(column > tol)
        if pos.size == 0:
            return "unbounded", pivots
        ratios = T[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = ties[np.argmin(basis[ties])]
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_iter:
            raise NumericError("simplex exceeded its pivot budget")


def linprog(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    *,
    tol: float = 1e-10,
    max_iter: int = 20000,
) -> LPResult:
    """Maximize ``c @ x`` over the polyhedron described above.

    ``duals_ub`` holds the shadow prices of the inequality rows (nonnegative at
    optimum).
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    for arr in (c, A_ub, b_ub, A_eq, b_eq):
        if not np.all(np.isfinite(arr)):
            raise NumericError("LP data must be finite")
    m1, m2 = A_ub.shape[0], A_eq.shape[0]
    if A_ub.shape[1] != n or A_eq.shape[1] != n or b_ub.size != m1 or b_eq.size != m2:
        raise ValueError("inconsistent LP dimensions")
    m = m1 + m2

    # rows with negative rhs are negated and need an artificial variable
    flip_ub = b_ub < 0
    flip_eq = b_eq < 0
    needs_art = np.concatenate([flip_ub, np.ones(m2, dtype=bool)])
    n_art = int(needs_art.sum())
    width = n + m1 + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m1, :n] = A_ub
    T[:m1, n : n + m1] = np.eye(m1)
    T[:m1, -1] = b_ub
    T[m1:m, :n] = A_eq
    T[m1:m, -1] = b_eq
    sign = np.concatenate([np.where(flip_ub, -1.0, 1.0), np.where(flip_eq, -1.0, 1.0)])
    T[:m] *= sign[:, None]
    basis = np.empty(m, dtype=int)
    art_cols = np.arange(n + m1, width)
    art_rows = np.flatnonzero(needs_art)
    T[art_rows, art_cols] = 1.0
    basis[art_rows] = art_cols
    slack_rows = np.flatnonzero(~needs_art)
    basis[slack_rows] = n + slack_rows  # only ub rows can be here
    is_art = np.zeros(width, dtype=bool)
    is_art[art_cols] = True
    pivots = 0

    if n_art:
        # phase 1: maximize -sum(artificials)
        T[-1, :] = -T[art_rows].sum(axis=0)
        T[-1, art_cols] = 0.0
        status, k = _iterate(T, basis, np.ones(width, dtype=bool), tol, max_iter)
        pivots += k
        if T[-1, -1] < -1e-8 * max(1.0, np.abs(T[:m, -1]).max(initial=0.0)):
            return LPResult("infeasible", None, None, None, pivots)
        # drive zero-level artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if not is_art[basis[i]]:
                continue
            row = T[i, :-1].copy()
            row[is_art] = 0.0
            j = np.flatnonzero(np.abs(row) > 1e-9)
            if j.size:
                _pivot(T, i, j[0])
                basis[i] = j[0]
                pivots += 1
            else:
                keep[i] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[-1:]])
            basis = basis[keep]
            m = basis.size

    # phase 2
    cost = np.zeros(width)
    cost[:n] = c
    T[-1, :] = 0.0
    T[-1, :-1] = -cost
    T[-1] += cost[basis] @ T[:m]
    allowed = ~is_art
    status, k = _iterate(T, basis, allowed, tol, max_iter)
    pivots += k
    if status != "optimal":
        return LPResult(status, None, None, None, pivots)
    x = np.zeros(width)
    x[basis] = T[:m, -1]
    duals = T[-1, n : n + m1].copy()
    return LPResult("optimal", x[:n], float(T[-1, -1]), duals, pivots)
