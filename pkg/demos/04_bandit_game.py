"""Batched elimination in a matrix game with bandit feedback.

Run: python3 demos/04_bandit_game.py
"""

import numpy as np

from batchedmg import AlgorithmConstants, BanditGame, run_bandit
from batchedmg.harness.plotdata import fit_loglog

game = BanditGame(np.array([[0.7, 0.5], [0.5, 0.3]]), noise="bernoulli")
print(f"value {game.value():.2f}; the second max-action loses {game.gap([0, 1]):.2f} per round")

Ks = [2**10, 2**12, 2**14, 2**16]
means = []
for K in Ks:
    runs = [run_bandit(game, K, AlgorithmConstants(C=0.05), seed) for seed in range(10)]
    means.append(np.mean([r.regret for r in runs]))
    poly = runs[0].final_polytope
    print(f"K={K:>6}: batches {runs[0].batch_count}, mean regret {means[-1]:7.1f}, "
          f"final polytope vertices {np.round(poly.vertices(), 3).tolist()}")
slope, _, r2 = fit_loglog(Ks, means)
print(f"log-log slope {slope:.3f} (R^2 {r2:.3f}); sqrt(K) growth would be 0.5")
