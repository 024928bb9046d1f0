"""Reward-free exploration: explore once, then solve any reward on the estimated model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .absorbing import EstimatedModel
from .errors import ConfigurationError
from .exploration import CrudeResult, ExplorationBudget, FineResult, crude_exploration, fine_exploration
from .elimination import _clamp_gap
from .game_model import MarkovGame, MaxPolicy, MinPolicy
from .solving import best_response_value, max_response_value, nash_value_iteration


@dataclass(frozen=True)
class RewardFreeBudget:
    """Crude (``N0``) and fine (``N1``) episode counts; the auxiliary run adds ``N * N0``."""

    N0: int
    N1: int
    epsilon: float | None = None
    delta: float = 0.1
    N: float = 2.0
    C1: float = 1.0

    def __post_init__(self):
        if self.N0 < 1 or self.N1 < 1:
            raise ConfigurationError("N0 and N1 must be positive")
        if not 0 < self.delta < 1 or self.N <= 0 or self.C1 <= 0:
            raise ConfigurationError("need delta in (0, 1) and positive N, C1")

    @classmethod
    def auto(cls, dims, epsilon: float, delta: float = 0.1, c: float = 1.0, **kw) -> "RewardFreeBudget":
        """``N0 = c H^5 S^3 A^2 B^2 i / (4 eps)``, ``N1 = c H^3 S^2 A B i / eps^2 + c H^2 S^2 A B i / (2 eps)``
        with ``i = log(H S A B / (eps delta))``."""
        if epsilon <= 0 or c <= 0:
            raise ConfigurationError("epsilon and c must be positive")
        H, S, A, B = dims
        it = math.log(H * S * A * B / (epsilon * delta))
        n0 = c * H**5 * S**3 * A**2 * B**2 * it / (4 * epsilon)
        n1 = c * H**3 * S**2 * A * B * it / epsilon**2 + c * H**2 * S**2 * A * B * it / (2 * epsilon)
        return cls(int(math.ceil(n0)), int(math.ceil(n1)), epsilon, delta, **kw)

    @property
    def aux(self) -> int:
        return int(math.floor(self.N * self.N0))

    @property
    def total(self) -> int:
        return self.N0 + self.N1 + self.aux

    def iota(self, dims) -> float:
        H, S, A, B = dims
        return math.log(2 * H * S * A * B * (self.N0 + self.N1) / self.delta)


@dataclass(frozen=True, eq=False)
class RewardFreeResult:
    model: EstimatedModel
    crude: CrudeResult
    fine: FineResult
    deployments: tuple

    @property
    def batch_count(self) -> int:
        return len(self.deployments)

    @property
    def n_episodes(self) -> int:
        return sum(d.n_episodes for d in self.deployments)


def run_reward_free(game: MarkovGame, vs, budget: RewardFreeBudget, seed) -> RewardFreeResult:
    """Crude exploration with ``N0`` episodes, then fine exploration with ``N1`` plus
    ``N * N0`` auxiliary episodes.  No reward is ever read."""
    rng = np.random.default_rng(seed)
    H = game.horizon
    iota = budget.iota(game.dims)
    crude_budget = ExplorationBudget(budget.N0, H, iota, budget.C1, budget.N, budget.delta)
    crude = crude_exploration(game, vs, crude_budget, rng)
    fine_budget = ExplorationBudget(budget.N1, H, iota, budget.C1, budget.N, budget.delta)
    fine = fine_exploration(game, crude, vs, fine_budget, crude.uniform_explorer, budget.aux, rng)
    return RewardFreeResult(fine.model, crude, fine, crude.deployments + fine.deployments)


def extract_nash_pair(model, reward) -> tuple[MaxPolicy, MinPolicy]:
    """Nash pair of the estimated model for ``reward``."""
    sol = nash_value_iteration(model, reward)
    return sol.max_strategy, sol.min_strategy


def nash_pair_gaps(game: MarkovGame, reward, mu: MaxPolicy, nu: MinPolicy) -> tuple[float, float]:
    """``(V* - V^{mu, dagger}, V^{dagger, nu} - V*)`` on the true game."""
    v_star = nash_value_iteration(game, reward).initial_value
    br, _ = best_response_value(game, reward, mu)
    mr, _ = max_response_value(game, reward, nu)
    return _clamp_gap(float(v_star - br)), _clamp_gap(float(mr - v_star))


def evaluate_rewards(game: MarkovGame, model, rewards) -> np.ndarray:
    """Per-reward gaps ``(k, 2)`` of the extracted pairs, evaluated on the true game."""
    out = []
    for r in rewards:
        mu, nu = extract_nash_pair(model, r)
        out.append(nash_pair_gaps(game, r, mu, nu))
    return np.array(out).reshape(-1, 2)
