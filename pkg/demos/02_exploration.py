"""Crude and fine exploration: find rarely reachable transitions, then cover the rest.

Run: python3 demos/02_exploration.py
"""

from batchedmg import (
    ExplorationBudget,
    build_absorbing,
    check_multiplicative_accuracy,
    crude_exploration,
    fine_exploration,
    init_version_space,
    make_env,
)

game = make_env({"name": "random_dense", "horizon": 2, "n_states": 3}, seed=1)
H, S, A, B = game.dims
vs = init_version_space(game.dims, 2)
print(f"{len(vs)} candidate max-policies on a grid of step 1/2")

budget = ExplorationBudget(T=20_000, H=H, iota=5.0, C1=1.0)
crude = crude_exploration(game, vs, budget, seed=0)
print(f"crude exploration: {len(crude.deployments)} batches, threshold {budget.threshold:.1f} visits")
print(f"  infrequent transitions: {len(crude.infrequent)} of {H * S * A * B * S}")

truth = build_absorbing(game, crude.infrequent)
rep = check_multiplicative_accuracy(crude.p_int, truth, 1.0 / H)
print(f"  intermediate model within factor 1 +- 1/H on {rep.pass_fraction:.1%} of tuples")

fine = fine_exploration(game, crude, vs, budget, crude.uniform_explorer, budget.T_prime, seed=0)
print(f"fine exploration: {fine.batch_count} batches, design objective {fine.objective:.2f} "
      f"(bound H(SAB+1) = {H * (S * A * B + 1)}), {len(fine.design)} mixture components")
err = abs(fine.model.transition - truth.transition).max()
print(f"  largest transition error of the final model: {err:.4f}")
