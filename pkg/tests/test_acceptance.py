"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line, printed in the terminal summary.
"""

import math

import numpy as np
import pytest

from batchedmg import (
    AlgorithmConstants,
    BanditGame,
    ExplorationBudget,
    RewardFreeBudget,
    build_absorbing,
    check_multiplicative_accuracy,
    crude_exploration,
    design_mixture,
    init_version_space,
    make_env,
    nash_value_iteration,
    policy_pair_value,
    run_bandit,
    run_main,
    run_reward_free,
    solve_matrix_game,
)
from batchedmg.absorbing import InfrequentSet
from batchedmg.exploration import coverage_matrix
from batchedmg.game_model import MixturePolicy, rollout
from batchedmg.harness.baseline import baseline_adaptive
from batchedmg.harness.plotdata import fit_loglog
from batchedmg.reward_free import evaluate_rewards

from conftest import random_game, random_policies
from oracles import design_grid_optimum, matrix_game_2x2
from test_solving import simulation_lemma_residual

# rps_chain settings for the Markov-game criteria; the default width constants are vacuous at this K
MG_CONSTANTS = AlgorithmConstants(C=0.05, C1=0.05, N=2.0, delta=0.1, bias_scale=0.0)
MG_KS = (2**12, 2**14, 2**16)
MG_SEEDS = 50


def loglog_bound(K):
    return math.ceil(math.log2(math.log2(K))) + 2


def record(report, n, ok, detail):
    report(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    return ok


@pytest.fixture(scope="module")
def mg_runs():
    game = make_env({"name": "rps_chain", "horizon": 2, "n_states": 2}, 0)
    nash = nash_value_iteration(game).max_strategy
    vs = init_version_space(game.dims, 4, extra=[nash])
    runs = {K: [run_main(game, K, MG_CONSTANTS, vs, s, track=nash) for s in range(MG_SEEDS)] for K in MG_KS}
    return game, runs


@pytest.fixture(scope="module")
def rf_runs():
    game = make_env({"name": "random_dense", "horizon": 2, "n_states": 2}, 0)
    budget = RewardFreeBudget.auto(game.dims, 0.15, 0.1, c=1.0)
    rewards = np.random.default_rng(2024).random((10,) + game.reward.shape)
    return game, budget, rewards, [run_reward_free(game, None, budget, s) for s in range(30)]


# ---------------------------------------------------------------- 1


def test_criterion_1_batch_ledger(report, mg_runs, rf_runs):
    game, runs = mg_runs
    main_runs = [led for lst in runs.values() for led in lst]
    for name, K in [("hard_gap", 1000), ("random_dense", 2**10), ("random_dense", 5000), ("hard_gap", 100_000)]:
        g = make_env({"name": name}, 1)
        main_runs.append(run_main(g, K, MG_CONSTANTS, init_version_space(g.dims, 2), 0))
    ok_main = all(
        led.K0 <= loglog_bound(led.K) and led.batch_count <= 2 * led.horizon + 2 * led.K0
        and led.n_episodes == led.K
        for led in main_runs
    )
    bgame = BanditGame(np.array([[0.7, 0.5], [0.5, 0.3]]))
    bandit_runs = [run_bandit(bgame, K, AlgorithmConstants(), s) for K in (2**10, 3000, 2**16, 10**6) for s in range(3)]
    ok_bandit = all(led.batch_count <= 2 * loglog_bound(led.K) and led.n_episodes == led.K for led in bandit_runs)
    g, _, _, rf = rf_runs
    ok_rf = all(r.batch_count == g.horizon + 2 for r in rf)
    ok = record(report, 1, ok_main and ok_bandit and ok_rf,
                f"main {len(main_runs)} runs ok={ok_main}, bandit {len(bandit_runs)} runs ok={ok_bandit}, "
                f"reward-free {len(rf)} runs ok={ok_rf}")
    assert ok


# ---------------------------------------------------------------- 2


def test_criterion_2_bandit_slope(report):
    game = BanditGame(np.array([[0.7, 0.5], [0.5, 0.3]]), noise="bernoulli")
    assert game.gap([0.0, 1.0]) == pytest.approx(0.2)
    Ks = [2**10, 2**12, 2**14, 2**16]
    consts = AlgorithmConstants(C=0.05)
    means = [float(np.mean([run_bandit(game, K, consts, s).regret for s in range(30)])) for K in Ks]
    slope, _, r2 = fit_loglog(Ks, means)
    ok = record(report, 2, 0.4 <= slope <= 0.65 and r2 >= 0.9,
                f"bandit slope {slope:.3f} (want [0.4, 0.65]), R^2 {r2:.4f} (want >= 0.9), "
                f"mean regret {[round(m, 1) for m in means]}")
    assert ok


# ---------------------------------------------------------------- 3


def test_criterion_3_markov_game_slope(report, mg_runs):
    _, runs = mg_runs
    means = [float(np.mean([led.regret for led in runs[K][:20]])) for K in MG_KS]
    slope, _, r2 = fit_loglog(MG_KS, means)
    ok = record(report, 3, 0.35 <= slope <= 0.7,
                f"Markov-game slope {slope:.3f} (want [0.35, 0.7]), R^2 {r2:.4f}, "
                f"mean regret {[round(m, 1) for m in means]} over 20 seeds")
    assert ok


# ---------------------------------------------------------------- 4


def test_criterion_4_nash_survival(report, mg_runs):
    _, runs = mg_runs
    rates = {K: np.mean([all(st["tracked_alive"] for st in led.stages) for led in runs[K]]) for K in MG_KS}
    ok = record(report, 4, all(r >= 0.9 for r in rates.values()),
                "Nash survival over 50 seeds " + ", ".join(f"K={K}: {r:.0%}" for K, r in rates.items()))
    assert ok


# ---------------------------------------------------------------- 5


def test_criterion_5_oracle_equivalence(report):
    rng = np.random.default_rng(55)
    # (a) closed-form 2x2 values
    a = max(abs(solve_matrix_game(M)[0] - matrix_game_2x2(M)) for M in rng.random((1000, 2, 2)))
    # (b) DP evaluation vs Monte-Carlo
    b_ok = 0
    for _ in range(20):
        g = random_game(rng, H=3, S=3, A=2, B=2)
        mu, nu = random_policies(rng, 3, 3, 2, 2)
        ret = rollout(g, MixturePolicy.pure(mu, nu), 100_000, rng).rewards.sum(axis=1)
        se = ret.std(ddof=1) / math.sqrt(len(ret))
        b_ok += abs(ret.mean() - policy_pair_value(g, None, mu, nu).initial_value) <= 3 * se
    # (c) simulation-lemma identity
    c = 0.0
    for _ in range(100):
        g1, g2 = random_game(rng, H=3, S=3), random_game(rng, H=3, S=3)
        mu, nu = random_policies(rng, 3, 3, 2, 2)
        c = max(c, simulation_lemma_residual(g1, g2, mu, nu))
    # (d) design vs grid search on <= 4 candidates
    d_worst = 0.0
    for k in (2, 3, 4):
        for _ in range(3):
            g = random_game(rng, H=2, S=2)
            model = build_absorbing(g, InfrequentSet(g.dims))
            pairs = [random_policies(rng, 2, 2, 2, 2) for _ in range(k)]
            for i, (mu, nu) in enumerate(pairs):  # sparse, overlapping supports
                m, n = mu.dist.copy(), nu.dist.copy()
                m[rng.random(m.shape[:2]) < 0.5] = np.eye(2)[i % 2]
                pairs[i] = (type(mu)(m), type(nu)(n))
            _, obj = design_mixture(pairs, model)
            grid = design_grid_optimum(coverage_matrix(pairs, model), res=200 if k < 4 else 100)
            d_worst = max(d_worst, obj / grid)
    ok = a <= 1e-6 and b_ok == 20 and c <= 1e-8 and d_worst <= 1 + 1e-3
    record(report, 5, ok,
           f"(a) max |dv| {a:.2e}; (b) {b_ok}/20 within 3 SE; (c) residual {c:.2e}; "
           f"(d) worst design/grid ratio {d_worst:.6f}")
    assert ok


# ---------------------------------------------------------------- 6


def test_criterion_6_multiplicative_accuracy(report):
    game = make_env({"name": "random_dense", "horizon": 2, "n_states": 2}, 0)
    H, S, A, B = game.dims
    C1 = 1.0
    iota = AlgorithmConstants(C1=C1).iota(game.dims, 2**16)
    T = int(math.ceil(50 * C1 * H**3 * S * A * B * iota))
    fractions = []
    for seed in range(30):
        crude = crude_exploration(game, None, ExplorationBudget(T, H, iota, C1), seed)
        rep = check_multiplicative_accuracy(crude.p_int, build_absorbing(game, crude.infrequent), 1.0 / H)
        fractions.append(rep.pass_fraction)
    good = np.mean(np.array(fractions) >= 0.95)
    ok = record(report, 6, good >= 0.9,
                f"T={T}: {good:.0%} of 30 seeds pass >= 95% of non-F tuples (min fraction {min(fractions):.3f})")
    assert ok


# ---------------------------------------------------------------- 7


def test_criterion_7_reward_free(report, rf_runs):
    game, budget, rewards, runs = rf_runs
    worst = np.array([evaluate_rewards(game, r.model, rewards).max(axis=0) for r in runs])
    good = np.mean(np.all(worst <= 0.15, axis=1))
    ok = record(report, 7, good >= 0.9,
                f"eps=0.15, N0={budget.N0}, N1={budget.N1}: {good:.0%} of 30 seeds within eps "
                f"(largest gap mu {worst[:, 0].max():.2e}, nu {worst[:, 1].max():.2e})")
    assert ok


# ---------------------------------------------------------------- 8


def _csv(tmp_path, name, ledger):
    p = tmp_path / name
    ledger.to_csv(p, "h")
    return p.read_bytes()


def test_criterion_8_determinism(report, tmp_path):
    g = make_env({"name": "rps_chain"}, 0)
    vs = init_version_space(g.dims, 4)
    bgame = BanditGame(np.array([[0.7, 0.5], [0.5, 0.3]]))
    pairs = {
        "main": lambda: run_main(g, 4096, MG_CONSTANTS, vs, 11),
        "bandit": lambda: run_bandit(bgame, 4096, AlgorithmConstants(), 11),
        "baseline": lambda: baseline_adaptive(g, 30, 11),
    }
    same = {k: _csv(tmp_path, f"{k}1.csv", f()) == _csv(tmp_path, f"{k}2.csv", f()) for k, f in pairs.items()}
    budget = RewardFreeBudget(2000, 2000)
    m1, m2 = (run_reward_free(g, None, budget, 11).model.to_json() for _ in range(2))
    same["reward_free"] = m1 == m2
    ok = record(report, 8, all(same.values()), "byte-identical reruns: " + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok
