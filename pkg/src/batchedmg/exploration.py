"""Layer-by-layer crude exploration, the coverage design and fine exploration.

Max-player policies come from an explicit candidate set (a version space);
the min-player is unconstrained and handled by exact dynamic programming.
Passing ``vs=None`` leaves both players unconstrained.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .absorbing import CountTable, EstimatedModel, InfrequentSet, estimate_all, estimate_transition
from .errors import ConfigurationError, ContractError
from .game_model import MarkovGame, MaxPolicy, MinPolicy, MixturePolicy, rollout
from .solving import cooperative_response_values, joint_max_value, occupancies

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


@dataclass(frozen=True)
class ExplorationBudget:
    """Episode budget of one exploration stage and the constants it uses."""

    T: int
    H: int
    iota: float
    C1: float = 1.0
    N: float = 2.0
    delta: float = 0.1

    def __post_init__(self):
        if self.H < 1:
            raise ConfigurationError("horizon must be positive")
        if self.T < 1:
            raise ConfigurationError("exploration needs at least one episode")
        if self.iota <= 0 or self.C1 <= 0 or self.N <= 0 or not 0 < self.delta < 1:
            raise ConfigurationError("iota, C1, N must be positive and delta in (0, 1)")

    @property
    def T0(self) -> int:
        return self.T // self.H

    @property
    def T_prime(self) -> int:
        return int(np.floor(self.N * self.T))

    def layer_episodes(self) -> list[int]:
        """``floor(T / H)`` episodes per layer, remainder on the last layer."""
        if self.T0 < 1:
            raise ConfigurationError(
                f"crude exploration needs T >= H episodes (got T={self.T}, H={self.H})"
            )
        out = [self.T0] * self.H
        out[-1] += self.T - self.T0 * self.H
        return out

    @property
    def threshold(self) -> float:
        """Counts at or below ``C1 H^2 iota`` mark a tuple as infrequent."""
        return self.C1 * self.H**2 * self.iota


@dataclass(frozen=True, eq=False)
class Deployment:
    """One frozen policy run for a fixed number of episodes (one batch)."""

    label: str
    policy: MixturePolicy
    n_episodes: int


@dataclass(frozen=True, eq=False)
class CrudeResult:
    infrequent: InfrequentSet
    p_int: EstimatedModel
    uniform_explorer: MixturePolicy
    deployments: tuple = ()
    counts: CountTable | None = None
    history: tuple = ()  # infrequent set after each layer


@dataclass(frozen=True, eq=False)
class FineResult:
    model: EstimatedModel
    design: MixturePolicy
    objective: float
    deployments: tuple = ()
    counts: CountTable | None = None
    pool_size: int = 0
    design_counts: CountTable | None = None

    @property
    def batch_count(self) -> int:
        return len(self.deployments)


# ---------------------------------------------------------------------------
# reachability planning


def alive_policies(vs) -> list[MaxPolicy] | None:
    """Alive max-policies of a version space (``None`` means unconstrained)."""
    if vs is None:
        return None
    if isinstance(vs, (list, tuple)):
        pols = list(vs)
    else:
        pols = vs.alive_candidates()
    if not pols:
        raise ContractError("version space has no alive candidate")
    return pols


def _point_mass_rows(dist: np.ndarray, acts: np.ndarray) -> None:
    """Overwrite ``dist[t, s]`` with a point mass on ``acts[t, s]`` (in place)."""
    dist[...] = 0.0
    np.put_along_axis(dist, acts[..., None], 1.0, axis=-1)


def greedy_pairs(model: EstimatedModel, h: int, mus: list[MaxPolicy] | None):
    """Pairs maximizing the reach of every ``(h, s, a, b)`` under ``model``.

    Returns a list of ``S * A * B`` pairs in ``(s, a, b)`` C-order together
    with their reach probabilities.  Ties go to the lowest candidate index.
    The min-player (and the max-player when ``mus`` is None) plays the
    reaching actions before layer ``h`` and uniformly elsewhere.
    """
    H, S, A, B = model.dims
    P = model.transition
    n = S + 1
    s0 = model.initial_state
    targets = np.array([(s, a, b) for s in range(S) for a in range(A) for b in range(B)])
    nT = len(targets)
    pairs, reach = [], np.zeros(nT)

    if mus is None:
        V = np.zeros((nT, n))
        V[np.arange(nT), targets[:, 0]] = 1.0
        act_ab = np.zeros((h, nT, n), dtype=np.int64)
        for t in range(h - 1, -1, -1):
            Q = np.einsum("xaby,Ty->Txab", P[t], V).reshape(nT, n, A * B)
            act_ab[t] = Q.argmax(axis=-1)
            V = np.take_along_axis(Q, act_ab[t][..., None], axis=-1)[..., 0]
        reach[:] = V[:, s0]
        for j, (s, a, b) in enumerate(targets):
            mu = np.full((H, S, A), 1.0 / A)
            nu = np.full((H, S, B), 1.0 / B)
            if h:
                aa, bb = np.divmod(act_ab[:, j, :S], B)
                _point_mass_rows(mu[:h], aa)
                _point_mass_rows(nu[:h], bb)
            mu[h, s] = np.eye(A)[a]
            nu[h, s] = np.eye(B)[b]
            pairs.append((MaxPolicy(mu), MinPolicy(nu)))
        return pairs, reach

    M = np.stack([m.dist for m in mus])
    k = M.shape[0]
    Mp = np.concatenate([M, np.full((k, H, 1, A), 1.0 / A)], axis=2)
    V = np.zeros((k, nT, n))
    V[:, np.arange(nT), targets[:, 0]] = Mp[:, h, targets[:, 0], targets[:, 1]]
    act_b = np.zeros((h, k, nT, n), dtype=np.int64)
    for t in range(h - 1, -1, -1):
        Q = np.einsum("xaby,kTy->kTxab", P[t], V)
        W = np.einsum("kxa,kTxab->kTxb", Mp[:, t], Q)
        act_b[t] = W.argmax(axis=-1)
        V = np.take_along_axis(W, act_b[t][..., None], axis=-1)[..., 0]
    vals = V[:, :, s0]
    best = vals.max(axis=0)
    for j, (s, a, b) in enumerate(targets):
        i = int(np.flatnonzero(vals[:, j] >= best[j] - TIE_TOL)[0])
        nu = np.full((H, S, B), 1.0 / B)
        if h:
            _point_mass_rows(nu[:h], act_b[:, i, j, :S])
        nu[h, s] = np.eye(B)[b]
        pairs.append((mus[i], MinPolicy(nu)))
        reach[j] = vals[i, j]
    return pairs, reach


def crude_exploration(game: MarkovGame, vs, budget: ExplorationBudget, seed) -> CrudeResult:
    """Explore layer by layer; return the infrequent set, ``P^int`` and a uniform explorer.

    Layer ``h`` deploys the uniform mixture of the reach-maximizing pairs of
    all ``(s, a, b)`` at layer ``h`` under the current ``P^int``, so exactly
    ``H`` batches are used.
    """
    rng = np.random.default_rng(seed)
    H, S, A, B = game.dims
    mus = alive_policies(vs)
    if budget.H != H:
        raise ConfigurationError("budget horizon does not match the game")
    episodes = budget.layer_episodes()
    thr = budget.threshold
    f = InfrequentSet(game.dims)
    p_int = EstimatedModel.uniform(game.dims, f, game.initial_state)
    all_pairs, deployments, history = [], [], []
    total = CountTable.zeros(game.dims)
    for h in range(H):
        pairs, _ = greedy_pairs(p_int, h, mus)
        explorer = MixturePolicy.uniform(pairs)
        ro = rollout(game, explorer, episodes[h], rng)
        counts = CountTable.from_rollout(ro, game.dims, layers=[h])
        new = np.zeros_like(f.mask)
        new[h] = counts.n4[h] <= thr
        f = f.union(new)
        p_int = estimate_transition(counts, f, h, p_int)
        all_pairs.extend(pairs)
        total = total + counts
        deployments.append(Deployment(f"crude-h{h}", explorer, episodes[h]))
        history.append(f)
    log.debug("crude exploration: |F|=%d of %d tuples", len(f), f.mask.size)
    return CrudeResult(
        f, p_int, MixturePolicy.uniform(all_pairs), tuple(deployments), total, tuple(history)
    )


# ---------------------------------------------------------------------------
# coverage design


def _ratios(D: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``g_i = sum_x D[i, x] / (lam @ D)[x]`` with 0/0 = 0 and c/0 = inf."""
    dl = lam @ D
    with np.errstate(divide="ignore", invalid="ignore"):
        R = np.where(D > 0, D / dl, 0.0)
    return R.sum(axis=1)


def minimax_ratio_weights(D, tol: float = 1e-4, max_iters: int = 2000) -> tuple[np.ndarray, float]:
    """Weights ``lam`` on the simplex approximately minimizing ``max_i g_i(lam)``.

    ``D`` holds one nonnegative coverage vector per row.  A multiplicative
    fixed-point iteration (which maximizes ``sum_x log (lam @ D)_x`` and so
    certifies an objective of at most the number of covered coordinates) gives
    the starting point; an SLSQP pass on the epigraph form then polishes it.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] < 1:
        raise ConfigurationError("need a (candidates, coordinates) matrix with one row or more")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise ConfigurationError("coverage vectors must be finite and nonnegative")
    D = D[:, D.sum(axis=0) > 0]
    k = D.shape[0]
    if k == 1 or D.shape[1] == 0:
        lam = np.zeros(k)
        lam[0] = 1.0
        return lam, float(_ratios(D, lam).max()) if D.size else 0.0
    scale = D.max(axis=0)
    Dn = D / scale
    lam = np.full(k, 1.0 / k)
    m = D.shape[1]
    for _ in range(max_iters):
        g = _ratios(Dn, lam)
        if g.max() <= m * (1.0 + tol):
            break
        lam = lam * g / m
        lam /= lam.sum()
    best_lam, best_obj = lam, float(_ratios(Dn, lam).max())

    def split(z):
        return np.clip(z[:k], 0.0, None), z[k]

    def cons(z):
        lam_, t = split(z)
        return t - _ratios(Dn, lam_)

    def cons_jac(z):
        lam_, _ = split(z)
        dl = np.maximum(lam_ @ Dn, 1e-300)
        J = -(Dn / dl**2) @ Dn.T
        return np.hstack([-J, np.ones((k, 1))])

    z0 = np.append(best_lam, best_obj)
    try:
        with warnings.catch_warnings():
            # SLSQP may probe slightly outside the bounds; the clipping is harmless
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(
                lambda z: z[k],
                z0,
                jac=lambda z: np.eye(1, k + 1, k)[0],
                method="SLSQP",
                bounds=[(1e-12, 1.0)] * k + [(0.0, None)],
                constraints=[
                    {"type": "ineq", "fun": cons, "jac": cons_jac},
                    {"type": "eq", "fun": lambda z: z[:k].sum() - 1.0, "jac": lambda z: np.append(np.ones(k), 0.0)},
                ],
                options={"maxiter": 500, "ftol": 1e-12},
            )
        cand = np.clip(res.x[:k], 0.0, None)
        cand /= cand.sum()
        obj = float(_ratios(Dn, cand).max())
        if np.isfinite(obj) and obj < best_obj:
            best_lam, best_obj = cand, obj
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.debug("SLSQP polish failed: %s", exc)
    # prune negligible weights when it costs nothing
    pruned = np.where(best_lam < 1e-9, 0.0, best_lam)
    pruned /= pruned.sum()
    obj = float(_ratios(Dn, pruned).max())
    if obj <= best_obj * (1.0 + 1e-9):
        best_lam, best_obj = pruned, obj
    if not np.isfinite(best_obj):
        raise ContractError("no mixture covers every candidate's support")
    return best_lam, best_obj


def coverage_matrix(candidates, model: EstimatedModel) -> np.ndarray:
    """Occupancies of each pair under ``model`` over original-state tuples, flattened."""
    mus = np.stack([m.dist for m, _ in candidates])
    nus = np.stack([n.dist for _, n in candidates])
    S = model.n_states
    d = occupancies(model, mus, nus)[:, :, :S]
    return d.reshape(len(candidates), -1)


def design_mixture(candidates, p_int: EstimatedModel, tol: float = 1e-4, max_iters: int = 2000):
    """Mixture over candidate pairs minimizing the worst occupancy-ratio sum.

    Returns ``(MixturePolicy, objective)``; components with zero weight are
    left out of the mixture.
    """
    candidates = list(candidates)
    if not candidates:
        raise ConfigurationError("design needs at least one candidate pair")
    D = coverage_matrix(candidates, p_int)
    lam, obj = minimax_ratio_weights(D, tol, max_iters)
    keep = np.flatnonzero(lam > 0)
    policy = MixturePolicy(tuple(candidates[i] for i in keep), lam[keep] / lam[keep].sum())
    return policy, obj


def _pair_key(mu: MaxPolicy, nu: MinPolicy) -> bytes:
    return mu.dist.tobytes() + b"|" + nu.dist.tobytes()


def _column_pairs(model: EstimatedModel, weights: np.ndarray, mus):
    """Best pair per alive max-policy for the linear objective ``sum_x d(x) w(x)``."""
    H, S, A, B = model.dims
    if mus is None:
        val, aa, ab = joint_max_value(model, weights)
        return [(val, MaxPolicy.deterministic(aa[:, :S], A), MinPolicy.deterministic(ab[:, :S], B))]
    M = np.stack([m.dist for m in mus])
    vals, acts = cooperative_response_values(model, weights, M, return_policy=True)
    return [(float(v), mu, MinPolicy.deterministic(act[:, :S], B)) for v, mu, act in zip(vals, mus, acts)]


def explorative_design(model: EstimatedModel, vs, *, tol: float = 1e-4, max_iters: int = 2000,
                       max_rounds: int = 30, add_per_round: int = 8):
    """Approximate the coverage design over ``alive x all min-policies`` by column generation.

    Returns ``(MixturePolicy, objective, pool_size)`` where ``objective`` is the
    worst ratio sum over every alive max-policy paired with its most
    demanding min-policy (not just over the pool).
    """
    mus = alive_policies(vs)
    H = model.horizon
    pool, keys = [], set()

    def add(pair):
        key = _pair_key(*pair)
        if key not in keys:
            keys.add(key)
            pool.append(pair)
            return True
        return False

    for h in range(H):
        for pair in greedy_pairs(model, h, mus)[0]:
            add(pair)
    S = model.n_states
    sup = np.inf
    for _ in range(max_rounds):
        D = coverage_matrix(pool, model)
        lam, obj = minimax_ratio_weights(D, tol, max_iters)
        dl = lam @ D
        w = np.divide(1.0, dl, out=np.zeros_like(dl), where=dl > 0).reshape((H, S) + model.dims[2:])
        cols = _column_pairs(model, w, mus)
        sup = max(c[0] for c in cols)
        if sup <= obj * (1.0 + tol):
            break
        added = 0
        for val, mu, nu in sorted(cols, key=lambda c: -c[0]):
            if val <= obj * (1.0 + tol) or added >= add_per_round:
                break
            added += add((mu, nu))
        if not added:
            break
    keep = np.flatnonzero(lam > 0)
    policy = MixturePolicy(tuple(pool[i] for i in keep), lam[keep] / lam[keep].sum())
    return policy, float(max(sup, obj)), len(pool)


def fine_exploration(
    game: MarkovGame,
    crude: CrudeResult,
    vs,
    budget: ExplorationBudget,
    aux_policy: MixturePolicy | None,
    aux_T: int,
    seed,
    *,
    tol: float = 1e-4,
    max_iters: int = 2000,
) -> FineResult:
    """Run the coverage design for ``T`` episodes and the auxiliary policy for
    ``aux_T`` episodes, then re-estimate every layer from the pooled counts."""
    rng = np.random.default_rng(seed)
    if aux_T < 0:
        raise ConfigurationError("aux_T must be nonnegative")
    design, objective, pool_size = explorative_design(crude.p_int, vs, tol=tol, max_iters=max_iters)
    ro = rollout(game, design, budget.T, rng)
    design_counts = counts = CountTable.from_rollout(ro, game.dims)
    deployments = [Deployment("fine-design", design, budget.T)]
    if aux_T > 0:
        if aux_policy is None:
            raise ConfigurationError("aux_T > 0 requires an auxiliary policy")
        ro_aux = rollout(game, aux_policy, aux_T, rng)
        counts = counts + CountTable.from_rollout(ro_aux, game.dims)
        deployments.append(Deployment("fine-aux", aux_policy, aux_T))
    model = estimate_all(counts, crude.infrequent, crude.p_int)
    return FineResult(model, design, objective, tuple(deployments), counts, pool_size, design_counts)
