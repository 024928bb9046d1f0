"""Tabular two-player zero-sum Markov games, policies and trajectory sampling.

Indices are dense and 0-based everywhere: steps ``h`` run over ``0..H-1``,
states over ``0..S-1``, max-player actions over ``0..A-1`` and min-player
actions over ``0..B-1``.  Arrays are laid out as

* transition ``P[h, s, a, b, s']``
* reward ``r[h, s, a, b]``
* max-player policy ``mu[h, s, a]``, min-player policy ``nu[h, s, b]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

PROB_ATOL = 1e-9


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_simplex(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{what} contains non-finite entries")
    if np.any(arr < -PROB_ATOL):
        raise ConfigurationError(f"{what} has negative probabilities")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > PROB_ATOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ConfigurationError(f"{what} rows must sum to 1 (worst error {worst:.3g})")


@dataclass(frozen=True, eq=False)
class RewardFunction:
    """Per-step reward table ``values[h, s, a, b]`` with entries in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.ndim != 4:
            raise ConfigurationError("reward must have shape (H, S, A, B)")
        if not np.all(np.isfinite(vals)) or vals.min() < 0.0 or vals.max() > 1.0:
            raise ConfigurationError("reward entries must lie in [0, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self):
        return self.values.shape


def as_reward_array(reward) -> np.ndarray:
    if isinstance(reward, RewardFunction):
        return reward.values
    return np.asarray(reward, dtype=float)


@dataclass(frozen=True, eq=False)
class MarkovGame:
    """Finite-horizon tabular zero-sum Markov game with a fixed initial state.

    Rewards are deterministic and known; the max-player collects them and the
    min-player pays them.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial_state: int = 0

    def __post_init__(self):
        P = _frozen(self.transition)
        r = _frozen(self.reward)
        if P.ndim != 5 or P.shape[1] != P.shape[4]:
            raise ConfigurationError("transition must have shape (H, S, A, B, S)")
        if r.shape != P.shape[:4]:
            raise ConfigurationError(
                f"reward shape {r.shape} does not match transition {P.shape[:4]}"
            )
        _check_simplex(P, "transition")
        if not np.all(np.isfinite(r)) or r.min() < 0.0 or r.max() > 1.0:
            raise ConfigurationError("reward entries must lie in [0, 1]")
        s0 = int(self.initial_state)
        if not 0 <= s0 < P.shape[1]:
            raise ConfigurationError(f"initial_state {s0} out of range")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "initial_state", s0)

    @property
    def horizon(self) -> int:
        return self.transition.shape[0]

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions_max(self) -> int:
        return self.transition.shape[2]

    @property
    def n_actions_min(self) -> int:
        return self.transition.shape[3]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        H, S, A, B = self.transition.shape[:4]
        return H, S, A, B

    def with_reward(self, reward) -> "MarkovGame":
        return MarkovGame(self.transition, as_reward_array(reward), self.initial_state)


class _StepPolicy:
    n_actions_axis = "A"

    def __init__(self, dist):
        arr = _frozen(dist)
        if arr.ndim != 3:
            raise ConfigurationError(
                f"{type(self).__name__}.dist must have shape (H, S, {self.n_actions_axis})"
            )
        _check_simplex(arr, f"{type(self).__name__}.dist")
        self._dist = arr

    @property
    def dist(self) -> np.ndarray:
        return self._dist

    @property
    def shape(self):
        return self._dist.shape

    @classmethod
    def uniform(cls, H: int, S: int, n_actions: int):
        return cls(np.full((H, S, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions, n_actions: int):
        """Point-mass policy from an integer array ``actions[h, s]``."""
        actions = np.asarray(actions, dtype=int)
        dist = np.zeros(actions.shape + (n_actions,))
        np.put_along_axis(dist, actions[..., None], 1.0, axis=-1)
        return cls(dist)

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self._dist, other._dist)

    def __hash__(self):
        return hash((type(self).__name__, self._dist.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}(shape={self._dist.shape})"


class MaxPolicy(_StepPolicy):
    """Markov policy of the max-player: ``dist[h, s]`` is a distribution over A."""


class MinPolicy(_StepPolicy):
    """Markov policy of the min-player: ``dist[h, s]`` is a distribution over B."""

    n_actions_axis = "B"


@dataclass(frozen=True, eq=False)
class MixturePolicy:
    """Episode-level mixture of Markov policy pairs.

    One component is drawn at the start of each episode and followed for all
    H steps (shared randomness across steps).
    """

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple((mu, nu) for mu, nu in self.components)
        if not comps:
            raise ConfigurationError("a mixture needs at least one component")
        w = _frozen(self.weights)
        if w.shape != (len(comps),):
            raise ConfigurationError("one weight per component is required")
        _check_simplex(w, "mixture weights")
        shape_mu, shape_nu = comps[0][0].shape, comps[0][1].shape
        for mu, nu in comps:
            if not isinstance(mu, MaxPolicy) or not isinstance(nu, MinPolicy):
                raise ConfigurationError("components must be (MaxPolicy, MinPolicy) pairs")
            if mu.shape != shape_mu or nu.shape != shape_nu:
                raise ConfigurationError("mixture components have inconsistent shapes")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @classmethod
    def pure(cls, mu: MaxPolicy, nu: MinPolicy) -> "MixturePolicy":
        return cls(((mu, nu),), np.ones(1))

    @classmethod
    def uniform(cls, pairs: Sequence) -> "MixturePolicy":
        pairs = list(pairs)
        return cls(tuple(pairs), np.full(len(pairs), 1.0 / len(pairs)))

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Component policies stacked as ``(C, H, S, A)`` and ``(C, H, S, B)``."""
        mus = np.stack([mu.dist for mu, _ in self.components])
        nus = np.stack([nu.dist for _, nu in self.components])
        return mus, nus

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True)
class Step:
    state: int
    action_a: int
    action_b: int
    reward: float
    next_state: int


@dataclass(frozen=True)
class Trajectory:
    steps: tuple
    episode_seed: int
    component: int = 0

    @property
    def total_reward(self) -> float:
        return float(sum(st.reward for st in self.steps))


@dataclass(frozen=True, eq=False)
class Rollout:
    """A batch of episodes collected under one deployed policy."""

    states: np.ndarray  # (n, H + 1)
    actions_a: np.ndarray  # (n, H)
    actions_b: np.ndarray  # (n, H)
    rewards: np.ndarray  # (n, H)
    components: np.ndarray  # (n,)

    @property
    def n_episodes(self) -> int:
        return self.states.shape[0]


def _check_policy_dims(game: MarkovGame, policy: MixturePolicy) -> None:
    H, S, A, B = game.dims
    mu, nu = policy.components[0]
    if mu.shape != (H, S, A) or nu.shape != (H, S, B):
        raise ConfigurationError(
            f"policy shapes {mu.shape}/{nu.shape} do not match game dims {(H, S, A, B)}"
        )


def _sample_rows(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling of one index per row of ``probs``."""
    cdf = np.cumsum(probs, axis=1)
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def rollout(
    game: MarkovGame, policy: MixturePolicy, n_episodes: int, rng: np.random.Generator
) -> Rollout:
    """Run ``n_episodes`` episodes of ``policy`` in ``game``, vectorized over episodes."""
    _check_policy_dims(game, policy)
    n = int(n_episodes)
    if n < 0:
        raise ConfigurationError("n_episodes must be nonnegative")
    H = game.horizon
    mus, nus = policy.stacked()
    comp = _sample_rows(np.broadcast_to(policy.weights, (n, len(policy))), rng.random(n))
    states = np.empty((n, H + 1), dtype=np.int64)
    acts_a = np.empty((n, H), dtype=np.int64)
    acts_b = np.empty((n, H), dtype=np.int64)
    states[:, 0] = game.initial_state
    for h in range(H):
        s = states[:, h]
        a = _sample_rows(mus[comp, h, s], rng.random(n))
        b = _sample_rows(nus[comp, h, s], rng.random(n))
        states[:, h + 1] = _sample_rows(game.transition[h, s, a, b], rng.random(n))
        acts_a[:, h] = a
        acts_b[:, h] = b
    steps = np.arange(H)
    rewards = game.reward[steps[None, :], states[:, :H], acts_a, acts_b]
    return Rollout(states, acts_a, acts_b, rewards, comp)


def sample_episode(game: MarkovGame, policy: MixturePolicy, seed: int) -> Trajectory:
    """Sample one episode; identical seeds give identical trajectories."""
    ro = rollout(game, policy, 1, np.random.default_rng(seed))
    steps = tuple(
        Step(
            int(ro.states[0, h]),
            int(ro.actions_a[0, h]),
            int(ro.actions_b[0, h]),
            float(ro.rewards[0, h]),
            int(ro.states[0, h + 1]),
        )
        for h in range(game.horizon)
    )
    return Trajectory(steps, int(seed), int(ro.components[0]))


def _dims_of(dims) -> tuple[int, int, int, int]:
    if isinstance(dims, MarkovGame):
        return dims.dims
    H, S, A, B = (int(d) for d in dims)
    return H, S, A, B


def indicator_reward(h: int, s: int, a: int, b: int, dims) -> RewardFunction:
    """Reward equal to 1 exactly at ``(h, s, a, b)`` and 0 elsewhere."""
    H, S, A, B = _dims_of(dims)
    for val, bound, name in ((h, H, "h"), (s, S, "s"), (a, A, "a"), (b, B, "b")):
        if not 0 <= val < bound:
            raise ConfigurationError(f"index {name}={val} out of range [0, {bound})")
    vals = np.zeros((H, S, A, B))
    vals[h, s, a, b] = 1.0
    return RewardFunction(vals)


def state_indicator_reward(h: int, s: int, dims) -> RewardFunction:
    """Reward equal to 1 at every action pair of ``(h, s)``."""
    H, S, A, B = _dims_of(dims)
    if not (0 <= h < H and 0 <= s < S):
        raise ConfigurationError(f"(h={h}, s={s}) out of range")
    vals = np.zeros((H, S, A, B))
    vals[h, s] = 1.0
    return RewardFunction(vals)


# ---------------------------------------------------------------------------
# experiment environments

ENV_NAMES = ("random_dense", "rps_chain", "hard_gap")


@dataclass(frozen=True)
class EnvSpec:
    name: str
    horizon: int = 2
    n_states: int = 2
    n_actions_max: int = 2
    n_actions_min: int = 2
    gap: float = 0.2
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        d = dict(d)
        return cls(
            name=d.pop("name"),
            horizon=int(d.pop("horizon", 2)),
            n_states=int(d.pop("n_states", 2)),
            n_actions_max=int(d.pop("n_actions_max", 2)),
            n_actions_min=int(d.pop("n_actions_min", 2)),
            gap=float(d.pop("gap", 0.2)),
            extra=d,
        )


def cyclic_stage_game(n: int) -> np.ndarray:
    """Symmetric zero-sum stage game rescaled to [0, 1] with value 0.5.

    ``n == 2`` is matching pennies; ``n >= 3`` generalizes rock-paper-scissors
    (action i beats the next ``(n - 1) // 2`` actions cyclically).
    """
    if n < 2:
        raise ConfigurationError("cyclic stage game needs at least 2 actions")
    if n == 2:
        return np.eye(2)
    G = np.full((n, n), 0.5)
    half = (n - 1) // 2
    for i in range(n):
        for k in range(1, half + 1):
            G[i, (i - k) % n] = 1.0
            G[(i - k) % n, i] = 0.0
    return G


def make_env(spec, seed: int) -> MarkovGame:
    """Build one of the experiment environments from an :class:`EnvSpec`.

    * ``random_dense``: Dirichlet(1) transitions, uniform [0, 1] rewards.
    * ``rps_chain``: every (h, s) plays a cyclic stage game with the max-player's
      actions permuted per state, so the Nash policy is strictly stochastic and
      state dependent; transitions are Dirichlet(1).
    * ``hard_gap``: max-action 0 dominates every other action by ``gap`` at every
      step and transitions ignore the max-player, so the deterministic policies
      deviating at step 0 are exactly ``gap`` worse than Nash.
    """
    if isinstance(spec, dict):
        spec = EnvSpec.from_dict(spec)
    if spec.name not in ENV_NAMES:
        raise ConfigurationError(f"unknown environment {spec.name!r}; expected one of {ENV_NAMES}")
    H, S, A, B = spec.horizon, spec.n_states, spec.n_actions_max, spec.n_actions_min
    if min(H, S, A, B) < 1:
        raise ConfigurationError("all environment dimensions must be positive")
    rng = np.random.default_rng(seed)

    if spec.name == "random_dense":
        P = rng.dirichlet(np.ones(S), size=(H, S, A, B))
        r = rng.random((H, S, A, B))
    elif spec.name == "rps_chain":
        if A != B:
            raise ConfigurationError("rps_chain requires n_actions_max == n_actions_min")
        G = cyclic_stage_game(A)
        r = np.empty((H, S, A, B))
        for h in range(H):
            for s in range(S):
                r[h, s] = G[rng.permutation(A)]
        P = rng.dirichlet(np.ones(S), size=(H, S, A, B))
    else:
        gap = float(spec.gap)
        if A < 2:
            raise ConfigurationError("hard_gap needs at least two max-player actions")
        if not 0.0 < gap <= 1.0:
            raise ConfigurationError("hard_gap gap must lie in (0, 1]")
        base = rng.random((H, S, B)) * (1.0 - gap)
        r = np.repeat(base[:, :, None, :], A, axis=2)
        r[:, :, 0, :] += gap
        P_sb = rng.dirichlet(np.ones(S), size=(H, S, B))
        P = np.repeat(P_sb[:, :, None, :, :], A, axis=2)
    # renormalize to kill Dirichlet round-off
    P = P / P.sum(axis=-1, keepdims=True)
    return MarkovGame(P, np.clip(r, 0.0, 1.0), 0)
