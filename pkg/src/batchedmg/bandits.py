"""Batched elimination for two-player zero-sum bandit games (one state, one step).

The max-player's version space is a polytope inside the simplex, cut by
linear constraints after every stage.  The min-player always plays uniformly
during data collection.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .elimination import RunLedger, nominal_length
from .errors import ConfigurationError, ContractError
from .exploration import minimax_ratio_weights
from .lp import linprog
from .solving import solve_matrix_game

log = logging.getLogger(__name__)

NOISE_MODELS = ("bernoulli", "uniform", "none")
VERTEX_ENUM_MAX_ACTIONS = 6
FEAS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BanditGame:
    """Mean payoff matrix ``r(a, b)`` in [0, 1] with a bounded zero-mean noise model."""

    mean_reward: np.ndarray
    noise: str = "bernoulli"

    def __post_init__(self):
        M = np.array(self.mean_reward, dtype=float)
        if M.ndim != 2 or not np.all(np.isfinite(M)) or M.min() < 0 or M.max() > 1:
            raise ConfigurationError("mean_reward must be a matrix with entries in [0, 1]")
        if self.noise not in NOISE_MODELS:
            raise ConfigurationError(f"noise must be one of {NOISE_MODELS}")
        M.setflags(write=False)
        object.__setattr__(self, "mean_reward", M)

    @property
    def n_actions_max(self) -> int:
        return self.mean_reward.shape[0]

    @property
    def n_actions_min(self) -> int:
        return self.mean_reward.shape[1]

    def value(self) -> float:
        return solve_matrix_game(self.mean_reward)[0]

    def gap(self, mu) -> float:
        """``r* - min_b r(mu, b)``."""
        return float(self.value() - (np.asarray(mu) @ self.mean_reward).min())

    def pull_counts(self, mu, nu, n: int, rng: np.random.Generator):
        """Collect ``n`` pulls of ``(mu, nu)``; return per-cell pull counts and reward sums."""
        A, B = self.mean_reward.shape
        probs = np.outer(mu, nu).ravel()
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        counts = rng.multinomial(n, probs).reshape(A, B)
        M = self.mean_reward
        if self.noise == "bernoulli":
            sums = rng.binomial(counts, M).astype(float)
        elif self.noise == "none":
            sums = counts * M
        else:
            half = np.minimum(M, 1.0 - M)
            sums = np.zeros((A, B))
            for (a, b), c in np.ndenumerate(counts):
                if c:
                    sums[a, b] = rng.uniform(M[a, b] - half[a, b], M[a, b] + half[a, b], size=c).sum()
        return counts, sums


@dataclass(frozen=True, eq=False)
class PolytopeVersionSpace:
    """``{p in simplex : coef_j @ p >= bound_j for every constraint j}``."""

    n_actions: int
    coefs: np.ndarray = None
    bounds: np.ndarray = None

    def __post_init__(self):
        A = int(self.n_actions)
        if A < 1:
            raise ConfigurationError("need at least one action")
        coefs = np.zeros((0, A)) if self.coefs is None else np.atleast_2d(np.array(self.coefs, float))
        bounds = np.zeros(0) if self.bounds is None else np.array(self.bounds, float).ravel()
        if coefs.shape != (bounds.size, A):
            raise ConfigurationError("constraint coefficients and bounds do not align")
        coefs.setflags(write=False)
        bounds.setflags(write=False)
        object.__setattr__(self, "n_actions", A)
        object.__setattr__(self, "coefs", coefs)
        object.__setattr__(self, "bounds", bounds)

    @property
    def constraints(self) -> list:
        return list(zip(self.coefs, self.bounds))

    @property
    def n_constraints(self) -> int:
        """Linear constraints including the simplex (A nonnegativity rows plus the sum)."""
        return self.bounds.size + self.n_actions + 1

    def add(self, coefs, bounds) -> "PolytopeVersionSpace":
        coefs = np.atleast_2d(np.asarray(coefs, float))
        return PolytopeVersionSpace(
            self.n_actions, np.vstack([self.coefs, coefs]), np.append(self.bounds, bounds)
        )

    def contains(self, p, tol: float = FEAS_TOL) -> bool:
        p = np.asarray(p, float)
        if np.any(p < -tol) or abs(p.sum() - 1.0) > tol:
            return False
        return bool(np.all(self.coefs @ p >= self.bounds - tol))

    def _lp_rows(self):
        return -self.coefs, -self.bounds

    def maximize(self, w) -> tuple[float, np.ndarray]:
        """``max_{p in polytope} w @ p`` (attained at a vertex)."""
        A_ub, b_ub = self._lp_rows()
        res = linprog(np.asarray(w, float), A_ub, b_ub, np.ones((1, self.n_actions)), np.ones(1))
        if not res.ok:
            raise ContractError(f"version-space polytope is {res.status}")
        return res.value, res.x

    def is_feasible(self) -> bool:
        try:
            self.maximize(np.zeros(self.n_actions))
        except ContractError:
            return False
        return True

    def vertices(self) -> np.ndarray:
        """Vertices by active-set enumeration (every choice of ``A - 1`` tight rows)."""
        A = self.n_actions
        if A > VERTEX_ENUM_MAX_ACTIONS:
            raise ConfigurationError(f"vertex enumeration is capped at A <= {VERTEX_ENUM_MAX_ACTIONS}")
        G = np.vstack([np.eye(A), self.coefs])
        h = np.concatenate([np.zeros(A), self.bounds])
        verts = []
        for rows in itertools.combinations(range(G.shape[0]), A - 1):
            M = np.vstack([np.ones((1, A)), G[list(rows)]])
            rhs = np.concatenate([[1.0], h[list(rows)]])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            p = np.linalg.solve(M, rhs)
            if np.all(G @ p >= h - 1e-9):
                p = np.clip(p, 0.0, None)
                p /= p.sum()
                if not any(np.allclose(p, v, atol=1e-9) for v in verts):
                    verts.append(p)
        if not verts:
            raise ContractError("version-space polytope is empty")
        return np.array(verts)


def lp_max_min(vs: PolytopeVersionSpace, rhat) -> tuple[float, np.ndarray]:
    """``max_{p in vs} min_b p @ rhat[:, b]`` by one linear program."""
    R = np.asarray(rhat, float)
    A, B = R.shape
    if A != vs.n_actions:
        raise ConfigurationError("rhat rows must match the number of max-player actions")
    # variables (p, x) with x >= 0; payoffs are shifted to be nonnegative
    shift = max(0.0, -R.min())
    Rs = R + shift
    c = np.append(np.zeros(A), 1.0)
    A_ub = np.hstack([-Rs.T, np.ones((B, 1))])
    b_ub = np.zeros(B)
    if vs.bounds.size:
        A_ub = np.vstack([A_ub, np.hstack([-vs.coefs, np.zeros((vs.bounds.size, 1))])])
        b_ub = np.append(b_ub, -vs.bounds)
    A_eq = np.append(np.ones(A), 0.0)[None]
    res = linprog(c, A_ub, b_ub, A_eq, np.ones(1))
    if not res.ok:
        raise ContractError(f"max-min program is {res.status}")
    p = np.clip(res.x[:A], 0.0, None)
    p /= p.sum()
    return float(res.value - shift), p


def explorative_max_policy(vs: PolytopeVersionSpace, tol: float = 1e-4, max_iters: int = 2000):
    """``mu`` minimizing ``sup_{mu' in vs} sum_a mu'(a) / mu(a)``; returns ``(mu, objective)``.

    The supremum is over vertices.  Small action sets enumerate vertices;
    larger ones grow a vertex pool by linear-programming column generation.
    """
    A = vs.n_actions
    if A <= VERTEX_ENUM_MAX_ACTIONS:
        V = vs.vertices()
        lam, _ = minimax_ratio_weights(V, tol, max_iters)
        mu = lam @ V
        return mu, _vertex_objective(V, mu)
    pool = []
    for a in range(A):
        pool.append(vs.maximize(np.eye(A)[a])[1])
    V = np.unique(np.round(np.array(pool), 12), axis=0)
    for _ in range(100):
        lam, obj = minimax_ratio_weights(V, tol, max_iters)
        mu = lam @ V
        w = np.divide(1.0, mu, out=np.zeros(A), where=mu > 0)
        sup, v = vs.maximize(w)
        if sup <= obj * (1 + tol):
            return mu, max(sup, obj)
        V = np.unique(np.round(np.vstack([V, v]), 12), axis=0)
    return mu, max(sup, obj)


def _vertex_objective(V: np.ndarray, mu: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(V > 0, V / mu, 0.0)
    return float(R.sum(axis=1).max())


# ---------------------------------------------------------------------------
# schedule and driver


def bandit_schedule(K: int, T0: int) -> list[int]:
    """Stage lengths ``floor(K^(1 - 2^-k))`` plus ``T0`` uniform pulls per stage, total ``K``."""
    lengths: list[int] = []
    used = 0
    k = 0
    while used < K:
        k += 1
        T = nominal_length(K, k)
        R = K - used
        if T + T0 >= R:
            T = R - T0
            if T < 1:
                if not lengths:
                    raise ConfigurationError(
                        f"K={K} is too small for one stage with {T0} uniform pulls"
                    )
                lengths[-1] += R
                break
        lengths.append(T)
        used += T + T0
    return lengths


@dataclass(eq=False)
class BanditLedger(RunLedger):
    """Run ledger for bandit games; ``survivors`` counts polytope vertices."""

    final_polytope: PolytopeVersionSpace | None = None
    T0: int = 0
    lengths: list = field(default_factory=list)

    @property
    def K0(self) -> int:
        return len(self.lengths)


def run_bandit(game: BanditGame, K: int, constants, seed) -> BanditLedger:
    """Batched elimination: two deployments per stage, polytope cuts after each stage."""
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    A, B = game.mean_reward.shape
    iota = math.log(2 * A * B * K / constants.delta)
    T0 = int(math.ceil(2 * A * B * iota))
    lengths = bandit_schedule(K, T0)
    ledger = BanditLedger(
        K, 1, seed if isinstance(seed, (int, np.integer)) else None, T0=T0, lengths=lengths
    )
    r_star = game.value()
    ledger.nash_value = r_star
    uniform_a = np.full(A, 1.0 / A)
    uniform_b = np.full(B, 1.0 / B)
    gap_uniform = game.gap(uniform_a)
    vs = PolytopeVersionSpace(A)
    for k, T in enumerate(lengths, start=1):
        mu, design_obj = explorative_max_policy(vs)
        n_vertices = len(vs.vertices()) if A <= VERTEX_ENUM_MAX_ACTIONS else -1
        counts, sums = game.pull_counts(mu, uniform_b, T, rng)
        ledger.add_batch(k, "explore", T, game.gap(mu), n_vertices)
        c0, s0 = game.pull_counts(uniform_a, uniform_b, T0, rng)
        ledger.add_batch(k, "uniform", T0, gap_uniform, n_vertices)
        counts, sums = counts + c0, sums + s0
        rhat = np.divide(sums, counts, out=np.full((A, B), 0.5), where=counts > 0)
        if np.any(counts == 0):
            ledger.flags.append(f"stage {k}: {int((counts == 0).sum())} cells without pulls")
        c, _ = lp_max_min(vs, rhat)
        width = 2.0 * constants.C * math.sqrt(A * B * iota / T)
        vs = vs.add(rhat.T, np.full(B, c - width))
        ledger.stages.append(
            {
                "stage": k,
                "T": T,
                "T0": T0,
                "width": width,
                "max_min": c,
                "design_objective": design_obj,
                "mu": [float(x) for x in mu],
                "constraints": int(vs.bounds.size),
            }
        )
        log.info("bandit stage %d: T=%d width=%.4g c=%.4g", k, T, width, c)
    ledger.final_polytope = vs
    ledger.final_gap = game.gap(explorative_max_policy(vs)[0])
    ledger.wall_clock = time.perf_counter() - t_start
    if ledger.n_episodes != K:
        raise ContractError(f"ran {ledger.n_episodes} pulls instead of {K}")
    return ledger
