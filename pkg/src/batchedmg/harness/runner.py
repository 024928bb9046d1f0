"""Execute the runs of an experiment configuration and persist their outputs."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..bandits import BanditGame, run_bandit
from ..elimination import init_version_space, run_main
from ..errors import ConfigurationError
from ..game_model import RewardFunction, make_env
from ..reward_free import RewardFreeBudget, evaluate_rewards, run_reward_free
from ..solving import nash_value_iteration
from .baseline import baseline_adaptive
from .config import ExperimentConfig, validate

log = logging.getLogger(__name__)


def _stem(cfg: ExperimentConfig, K, seed) -> str:
    if cfg.algorithm == "reward_free":
        return f"reward_free_seed{seed}"
    return f"{cfg.algorithm}_K{K}_seed{seed}"


def load_rewards(path, dims) -> list[RewardFunction]:
    """Reward tensors from ``.npy`` (stacked) or JSON (list of nested lists)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"rewards file not found: {path}")
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        arr = np.array(json.loads(path.read_text()), dtype=float)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5 or arr.shape[1:] != tuple(dims):
        raise ConfigurationError(f"reward tensors must have shape (k, {', '.join(map(str, dims))})")
    return [RewardFunction(r) for r in arr]


def _rewards(cfg: ExperimentConfig, dims) -> list[RewardFunction]:
    rf = cfg.reward_free
    if "rewards_file" in rf:
        return load_rewards(rf["rewards_file"], dims)
    rng = np.random.default_rng(rf.get("reward_seed", 0))
    return [RewardFunction(rng.random(dims)) for _ in range(rf.get("n_random_rewards", 10))]


def run_single(cfg: ExperimentConfig, K, seed: int, out_dir) -> dict:
    """One (K, seed) run; writes its CSV and JSON summary and returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(cfg, K, seed)
    summary = {"config_hash": cfg.hash, "config": cfg.raw, "algorithm": cfg.algorithm, "seed": seed}
    if cfg.algorithm == "bandit":
        game = BanditGame(np.array(cfg.bandit_means), cfg.bandit_noise)
        ledger = run_bandit(game, K, cfg.constants, seed)
    elif cfg.algorithm == "reward_free":
        game = make_env(cfg.env, cfg.env_seed)
        rf = cfg.reward_free
        kw = dict(delta=cfg.constants.delta, N=cfg.constants.N, C1=cfg.constants.C1)
        if "N0" in rf:
            budget = RewardFreeBudget(rf["N0"], rf["N1"], rf.get("epsilon"), **kw)
        else:
            budget = RewardFreeBudget.auto(game.dims, rf["epsilon"], c=rf.get("c", 1.0), **kw)
        res = run_reward_free(game, None, budget, seed)
        gaps = evaluate_rewards(game, res.model, _rewards(cfg, game.dims))
        with open(out / f"{stem}.csv", "w") as fh:
            fh.write(f"# config_hash={cfg.hash} seed={seed}\n")
            fh.write("reward_index,gap_max_player,gap_min_player\n")
            for i, (gm, gn) in enumerate(gaps.tolist()):
                fh.write(f"{i},{gm:.12g},{gn:.12g}\n")
        (out / f"{stem}_model.json").write_text(res.model.to_json())
        summary.update(
            N0=budget.N0, N1=budget.N1, aux=budget.aux, batch_count=res.batch_count,
            max_gap_max_player=float(gaps[:, 0].max()), max_gap_min_player=float(gaps[:, 1].max()),
        )
        (out / f"{stem}.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        return summary
    else:
        game = make_env(cfg.env, cfg.env_seed)
        if cfg.algorithm == "main":
            tol = cfg.tolerances.get("solver")
            nash = nash_value_iteration(game, **({"tol": tol} if tol else {}))
            extra = [nash.max_strategy] if cfg.include_nash else []
            vs0 = init_version_space(game.dims, cfg.grid_resolution, extra, cap=cfg.candidate_cap)
            ledger = run_main(
                game, K, cfg.constants, vs0, seed,
                inject_empirical_nash=cfg.inject_empirical_nash,
                design_tol=cfg.tolerances.get("design", 1e-4),
                track=nash.max_strategy if cfg.include_nash else None,
            )
        else:
            ledger = baseline_adaptive(game, K, seed)
    ledger.to_csv(out / f"{stem}.csv", cfg.hash)
    summary.update(ledger.summary())
    (out / f"{stem}.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=float))
    return summary


def _task(args):
    raw, K, seed, out_dir = args
    return run_single(validate(raw), K, seed, out_dir)


def run_experiment(cfg: ExperimentConfig, out_dir=None, *, workers: int = 1, seed_offset: int = 0) -> list[dict]:
    """All (K, seed) runs of ``cfg``, optionally across worker processes."""
    out_dir = Path(out_dir or cfg.output_dir)
    Ks = cfg.K_grid if cfg.algorithm != "reward_free" else (None,)
    tasks = [(cfg.raw, K, s + seed_offset, str(out_dir)) for K in Ks for s in cfg.seeds]
    if workers <= 1 or len(tasks) == 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks))
