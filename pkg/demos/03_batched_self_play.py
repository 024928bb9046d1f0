"""Batched self-play versus a fully adaptive learner on the same game.

The batched learner deploys O(H + log log K) policies; the adaptive one
switches after every episode.  Run: python3 demos/03_batched_self_play.py
"""

import numpy as np

from batchedmg import AlgorithmConstants, init_version_space, make_env, nash_value_iteration, run_main
from batchedmg.harness.baseline import baseline_adaptive

game = make_env({"name": "rps_chain", "horizon": 2, "n_states": 2}, seed=0)
nash = nash_value_iteration(game).max_strategy
vs = init_version_space(game.dims, 4, extra=[nash])
consts = AlgorithmConstants(C=0.05, C1=0.05, bias_scale=0.0)

for K in (2**12, 2**14, 2**16):
    runs = [run_main(game, K, consts, vs, seed, track=nash) for seed in range(5)]
    led = runs[0]
    print(f"K={K:>6}: stages {led.K0}, batches {led.batch_count}, "
          f"mean regret {np.mean([r.regret for r in runs]):8.1f}, "
          f"survivors {led.stages[-1]['alive_after']}/{len(vs)}, "
          f"Nash alive in {sum(all(s['tracked_alive'] for s in r.stages) for r in runs)}/5 runs")

print("\nstage log of one K=65536 run:")
for st in runs[0].stages:
    print(f"  stage {st['stage']}: T={st['T']:>6} width={st['width']:.3f} "
          f"alive {st['alive_before']} -> {st['alive_after']}")

base = baseline_adaptive(game, 2000, 0)
print(f"\nadaptive baseline, K=2000: {base.batch_count} batches, regret {base.regret:.1f}")
