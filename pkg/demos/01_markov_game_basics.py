"""Build a small zero-sum Markov game, solve it, and check a few policies against it.

Run: python3 demos/01_markov_game_basics.py
"""

import numpy as np

from batchedmg import (
    MaxPolicy,
    MinPolicy,
    MixturePolicy,
    best_response_value,
    make_env,
    nash_value_iteration,
    policy_pair_value,
    sample_episode,
)

game = make_env({"name": "rps_chain", "horizon": 2, "n_states": 2}, seed=0)
H, S, A, B = game.dims
print(f"rps_chain game: H={H} S={S} A={A} B={B}")

# Every state plays a permuted matching-pennies stage game, so the value is H/2.
sol = nash_value_iteration(game)
print(f"Nash value V* = {sol.initial_value:.6f}")
print("Nash max-policy at h=0:\n", np.round(sol.max_strategy.dist[0], 4))

# A fixed pure policy is exploitable; the uniform policy happens to be safe here.
for name, mu in [("always action 0", MaxPolicy.deterministic(np.zeros((H, S), int), A)),
                 ("uniform", MaxPolicy.uniform(H, S, A)),
                 ("Nash", sol.max_strategy)]:
    br, _ = best_response_value(game, None, mu)
    print(f"{name:>16}: best-response value {br:.4f}, gap {max(0.0, sol.initial_value - br):.4f}")

# Exact evaluation agrees with simulated returns.
pair = MixturePolicy.pure(sol.max_strategy, MinPolicy.uniform(H, S, B))
exact = policy_pair_value(game, None, *pair.components[0]).initial_value
returns = [sample_episode(game, pair, seed).total_reward for seed in range(5000)]
print(f"pair value: exact {exact:.4f}, Monte-Carlo {np.mean(returns):.4f} over 5000 episodes")
