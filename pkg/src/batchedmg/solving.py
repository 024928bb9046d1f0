"""Exact planning on tabular models: matrix games, Nash value iteration,
best responses, policy evaluation and occupancy measures.

Every function here accepts either a :class:`~batchedmg.game_model.MarkovGame`
or an absorbing :class:`~batchedmg.absorbing.EstimatedModel`.  On an absorbing
model the extra state pays zero reward and policies act uniformly there, so
values never depend on what happens at the absorbing state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .game_model import MarkovGame, MaxPolicy, MinPolicy, MixturePolicy, as_reward_array
from .lp import linprog

SOLVER_TOL = 1e-7


# ---------------------------------------------------------------------------
# matrix games


def solve_matrix_game(payoff, tol: float = SOLVER_TOL) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal mixed strategies of the zero-sum game ``max_p min_q p^T M q``.

    Solved as the LP ``max 1^T y  s.t.  M' y <= 1, y >= 0`` with
    ``M' = M - min(M) + 1 > 0``; the column strategy is ``y / sum(y)`` and the
    row strategy comes from the LP duals.
    """
    M = np.atleast_2d(np.asarray(payoff, dtype=float))
    if M.ndim != 2:
        raise NumericError("payoff must be a matrix")
    if not np.all(np.isfinite(M)):
        raise NumericError("payoff entries must be finite")
    nA, nB = M.shape
    lo, hi = M.min(), M.max()
    if hi - lo <= 1e-15 * max(1.0, abs(hi)):
        return float(lo), np.full(nA, 1.0 / nA), np.full(nB, 1.0 / nB)
    shift = 1.0 - lo
    Mp = M + shift
    res = linprog(np.ones(nB), Mp, np.ones(nA))
    if not res.ok:
        raise NumericError(f"matrix game LP failed with status {res.status}")
    total = res.x.sum()
    q = np.clip(res.x / total, 0.0, None)
    q /= q.sum()
    p = np.clip(res.duals_ub, 0.0, None)
    p /= p.sum()
    value = 1.0 / total - shift
    row_guarantee = (p @ M).min()
    col_guarantee = (M @ q).max()
    scale = max(1.0, float(np.abs(M).max()))
    if row_guarantee < value - tol * scale or col_guarantee > value + tol * scale:
        raise NumericError(
            f"matrix game solution not certified: value={value}, "
            f"row guarantees {row_guarantee}, column guarantees {col_guarantee}"
        )
    return float(value), p, q


# ---------------------------------------------------------------------------
# model views


def model_arrays(model, reward=None) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Return ``(P, r, S_orig, s0)`` with the reward zero-padded to all model states."""
    P = model.transition
    n_model = P.shape[1]
    if reward is None:
        if not isinstance(model, MarkovGame):
            raise ConfigurationError("a reward is required for models without one")
        reward = model.reward
    r = as_reward_array(reward)
    H, S, A, B = r.shape
    if P.shape[0] != H or P.shape[2:4] != (A, B) or S > n_model:
        raise ConfigurationError(f"reward shape {r.shape} incompatible with model {P.shape}")
    if S < n_model:
        r = np.concatenate([r, np.zeros((H, n_model - S, A, B))], axis=1)
    return P, r, S, model.initial_state


def _pad_policy(dist: np.ndarray, n_model: int) -> np.ndarray:
    """Extend ``dist[..., h, s, a]`` with uniform rows for extra model states."""
    S, nA = dist.shape[-2], dist.shape[-1]
    if S == n_model:
        return dist
    if S > n_model:
        raise ConfigurationError("policy has more states than the model")
    pad_shape = dist.shape[:-2] + (n_model - S, nA)
    return np.concatenate([dist, np.full(pad_shape, 1.0 / nA)], axis=-2)


def _policy_dist(policy, n_actions: int, H: int, S: int, what: str) -> np.ndarray:
    dist = policy.dist if hasattr(policy, "dist") else np.asarray(policy, dtype=float)
    if dist.shape[-3:] != (H, S, n_actions):
        raise ConfigurationError(f"{what} shape {dist.shape} does not match (H, S, {n_actions})")
    return dist


# ---------------------------------------------------------------------------
# Nash value iteration


@dataclass(frozen=True, eq=False)
class NashSolution:
    """Nash values ``value[h, s]`` (h = 0..H, last row zero) and equilibrium policies."""

    value: np.ndarray
    q: np.ndarray
    max_strategy: MaxPolicy
    min_strategy: MinPolicy
    initial_state: int

    @property
    def initial_value(self) -> float:
        return float(self.value[0, self.initial_state])


def nash_value_iteration(model, reward=None, *, tol: float = SOLVER_TOL) -> NashSolution:
    """Backward induction, solving the stage matrix game at every ``(h, s)``."""
    P, r, S, s0 = model_arrays(model, reward)
    H, n, A, B = r.shape
    V = np.zeros((H + 1, n))
    Q = np.zeros((H, n, A, B))
    mu = np.full((H, S, A), 1.0 / A)
    nu = np.full((H, S, B), 1.0 / B)
    for h in range(H - 1, -1, -1):
        Q[h] = r[h] + P[h] @ V[h + 1]
        for s in range(n):
            val, p, q = solve_matrix_game(Q[h, s], tol)
            V[h, s] = val
            if s < S:
                mu[h, s] = p
                nu[h, s] = q
    return NashSolution(V, Q, MaxPolicy(mu), MinPolicy(nu), s0)


# ---------------------------------------------------------------------------
# best responses


def _response_dp(model, reward, pols, player: str, sense: str):
    """Single-agent DP for one player against a stack of fixed opponent policies.

    ``player`` is the optimizing player ("min" or "max") and ``sense`` is
    "min" or "max".  Returns initial-state values ``(k,)`` and greedy actions
    ``(k, H, n_model_states)``.
    """
    P, r, S, s0 = model_arrays(model, reward)
    H, n, A, B = r.shape
    pols = np.asarray(pols, dtype=float)
    n_fixed = A if player == "min" else B
    _policy_dist(pols[0], n_fixed, H, S, "opponent policy")
    pols = _pad_policy(pols, n)
    k = pols.shape[0]
    pick = np.argmin if sense == "min" else np.argmax
    V = np.zeros((k, n))
    acts = np.zeros((k, H, n), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        Qh = r[h][None] + np.einsum("sabt,kt->ksab", P[h], V)
        if player == "min":
            W = np.einsum("ksa,ksab->ksb", pols[:, h], Qh)
        else:
            W = np.einsum("ksb,ksab->ksa", pols[:, h], Qh)
        acts[:, h] = pick(W, axis=-1)
        V = np.take_along_axis(W, acts[:, h, :, None], axis=-1)[..., 0]
    return V[:, s0], acts


def _stacked_response(model, reward, pols, player, sense, return_policy):
    pols = np.asarray(pols, dtype=float)
    single = pols.ndim == 3
    vals, acts = _response_dp(model, reward, pols[None] if single else pols, player, sense)
    if single:
        vals, acts = vals[0], acts[0]
    return (vals, acts) if return_policy else vals


def best_response_values(model, reward, mus: np.ndarray, *, return_policy: bool = False):
    """``min_nu V^{mu,nu}`` at the initial state for a stack of max-policies.

    ``mus`` has shape ``(k, H, S, A)``; the best response is computed by exact
    dynamic programming over the min-player's induced MDP, vectorized over k.
    Returns values ``(k,)`` and, optionally, deterministic best-response
    actions ``(k, H, n_model_states)``.
    """
    return _stacked_response(model, reward, mus, "min", "min", return_policy)


def cooperative_response_values(model, reward, mus: np.ndarray, *, return_policy: bool = False):
    """``max_nu V^{mu,nu}``: the min-player helping the max-player (reachability planning)."""
    return _stacked_response(model, reward, mus, "min", "max", return_policy)


def best_response_value(model, reward, mu) -> tuple[float, MinPolicy]:
    """Exact ``inf_nu V^{mu,nu}(reward, model)`` at the initial state and a minimizer."""
    _, r, S, _ = model_arrays(model, reward)
    B = r.shape[3]
    dist = _policy_dist(mu, r.shape[2], r.shape[0], S, "max-policy")
    val, acts = best_response_values(model, reward, dist, return_policy=True)
    return float(val), MinPolicy.deterministic(acts[:, :S], B)


def max_response_values(model, reward, nus: np.ndarray, *, return_policy: bool = False):
    """``max_mu V^{mu,nu}`` at the initial state for a stack of min-policies."""
    return _stacked_response(model, reward, nus, "max", "max", return_policy)


def joint_max_value(model, reward) -> tuple[float, np.ndarray, np.ndarray]:
    """``max_{mu,nu} V^{mu,nu}`` with deterministic maximizing actions ``(H, n)`` per player."""
    P, r, S, s0 = model_arrays(model, reward)
    H, n, A, B = r.shape
    V = np.zeros(n)
    act_a = np.zeros((H, n), dtype=np.int64)
    act_b = np.zeros((H, n), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        Q = (r[h] + P[h] @ V).reshape(n, A * B)
        best = Q.argmax(axis=1)
        act_a[h], act_b[h] = np.divmod(best, B)
        V = Q[np.arange(n), best]
    return float(V[s0]), act_a, act_b


def max_response_value(model, reward, nu) -> tuple[float, MaxPolicy]:
    """Exact ``sup_mu V^{mu,nu}(reward, model)`` at the initial state and a maximizer."""
    _, r, S, _ = model_arrays(model, reward)
    dist = _policy_dist(nu, r.shape[3], r.shape[0], S, "min-policy")
    val, acts = max_response_values(model, reward, dist, return_policy=True)
    return float(val), MaxPolicy.deterministic(acts[:, :S], r.shape[2])


# ---------------------------------------------------------------------------
# policy evaluation and occupancies


@dataclass(frozen=True, eq=False)
class ValueTable:
    """``v[h, s]`` for h = 0..H (``v[H] = 0``) and ``q[h, s, a, b]``."""

    v: np.ndarray
    q: np.ndarray
    initial_state: int

    @property
    def initial_value(self) -> float:
        return float(self.v[0, self.initial_state])


def policy_pair_value(model, reward, mu, nu) -> ValueTable:
    """Exact dynamic-programming evaluation of the pair ``(mu, nu)``."""
    P, r, S, s0 = model_arrays(model, reward)
    H, n, A, B = r.shape
    m = _pad_policy(_policy_dist(mu, A, H, S, "max-policy"), n)
    v_ = _pad_policy(_policy_dist(nu, B, H, S, "min-policy"), n)
    V = np.zeros((H + 1, n))
    Q = np.zeros((H, n, A, B))
    for h in range(H - 1, -1, -1):
        Q[h] = r[h] + P[h] @ V[h + 1]
        V[h] = np.einsum("sa,sab,sb->s", m[h], Q[h], v_[h])
    return ValueTable(V, Q, s0)


def pair_values(model, reward, mus: np.ndarray, nus: np.ndarray) -> np.ndarray:
    """Initial-state values for stacks of pairs ``mus (k,H,S,A)``, ``nus (k,H,S,B)``."""
    P, r, S, s0 = model_arrays(model, reward)
    H, n, A, B = r.shape
    mus = _pad_policy(np.asarray(mus, dtype=float), n)
    nus = _pad_policy(np.asarray(nus, dtype=float), n)
    V = np.zeros((mus.shape[0], n))
    for h in range(H - 1, -1, -1):
        Qh = r[h][None] + np.einsum("sabt,kt->ksab", P[h], V)
        V = np.einsum("ksa,ksab,ksb->ks", mus[:, h], Qh, nus[:, h])
    return V[:, s0]


def occupancies(model, mus: np.ndarray, nus: np.ndarray) -> np.ndarray:
    """Occupancy measures ``d[k, h, s, a, b]`` over all model states for stacked pairs."""
    P = model.transition
    H, n, A, B, _ = P.shape
    mus = np.asarray(mus, dtype=float)
    nus = np.asarray(nus, dtype=float)
    S = mus.shape[-2]
    _policy_dist(mus[0], A, H, S, "max-policy")
    _policy_dist(nus[0], B, H, S, "min-policy")
    mus = _pad_policy(mus, n)
    nus = _pad_policy(nus, n)
    k = mus.shape[0]
    d = np.zeros((k, H, n, A, B))
    rho = np.zeros((k, n))
    rho[:, model.initial_state] = 1.0
    for h in range(H):
        d[:, h] = rho[:, :, None, None] * mus[:, h, :, :, None] * nus[:, h, :, None, :]
        rho = np.einsum("ksab,sabt->kt", d[:, h], P[h])
    return d


def occupancy(model, policy, nu=None) -> np.ndarray:
    """Occupancy ``d[h, s, a, b]`` of a pair, or of a mixture (episode-level weighting)."""
    if isinstance(policy, MixturePolicy):
        mus, nus = policy.stacked()
        return np.einsum("k,khsab->hsab", policy.weights, occupancies(model, mus, nus))
    if nu is None:
        raise ConfigurationError("a min-policy is required unless a mixture is given")
    mu_d = policy.dist if hasattr(policy, "dist") else np.asarray(policy)
    nu_d = nu.dist if hasattr(nu, "dist") else np.asarray(nu)
    return occupancies(model, mu_d[None], nu_d[None])[0]


def visitation_probability(model, policy, nu=None, *, h: int, s: int, a=None, b=None) -> float:
    """Probability of visiting ``(h, s)`` or ``(h, s, a, b)`` under the given policy."""
    d = occupancy(model, policy, nu)
    H, n, A, B = d.shape
    if not (0 <= h < H and 0 <= s < n):
        raise ConfigurationError(f"(h={h}, s={s}) out of range")
    if a is None and b is None:
        return float(d[h, s].sum())
    if a is None or b is None:
        raise ConfigurationError("give both actions or neither")
    if not (0 <= a < A and 0 <= b < B):
        raise ConfigurationError("action index out of range")
    return float(d[h, s, a, b])


def nash_gap(game: MarkovGame, mu, reward=None, nash_value: float | None = None) -> float:
    """``V* - V^{mu, dagger}`` on the given model (max-player exploitability)."""
    if nash_value is None:
        nash_value = nash_value_iteration(game, reward).initial_value
    val, _ = best_response_value(game, reward, mu)
    return float(nash_value - val)
