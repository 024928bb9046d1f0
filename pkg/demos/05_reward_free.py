"""Explore once without rewards, then plan for many rewards on the learned model.

Run: python3 demos/05_reward_free.py
"""

import numpy as np

from batchedmg import RewardFreeBudget, make_env, run_reward_free
from batchedmg.reward_free import evaluate_rewards

game = make_env({"name": "random_dense", "horizon": 2, "n_states": 2}, seed=0)
budget = RewardFreeBudget.auto(game.dims, epsilon=0.15, delta=0.1, c=1.0)
print(f"budget: N0={budget.N0} crude, N1={budget.N1} fine, {budget.aux} auxiliary, total {budget.total}")

res = run_reward_free(game, None, budget, seed=0)
print(f"{res.batch_count} batches for {res.n_episodes} episodes")

rewards = np.random.default_rng(7).random((10,) + game.reward.shape)
gaps = evaluate_rewards(game, res.model, rewards)
for i, (gm, gn) in enumerate(gaps):
    print(f"reward {i}: max-player gap {gm:.2e}, min-player gap {gn:.2e}")
print(f"all within epsilon=0.15: {bool(gaps.max() <= 0.15)}")
