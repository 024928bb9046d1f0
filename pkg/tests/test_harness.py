import json
import subprocess
import sys

import numpy as np
import pytest

from batchedmg import ContractError, make_env
from batchedmg.harness import cli
from batchedmg.harness.baseline import baseline_adaptive
from batchedmg.harness.config import config_hash, validate
from batchedmg.harness.plotdata import fit_loglog, read_ledger

MAIN = {
    "algorithm": "main",
    "env": {"name": "rps_chain", "horizon": 2, "n_states": 2},
    "K_grid": [1024, 2048, 4096],
    "seeds": [0, 1, 2, 3, 4],
    "constants": {"C": 0.05, "C1": 0.05, "bias_scale": 0.0},
    "grid_resolution": 2,
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------- config


def test_validate_config_ok(tmp_path, capsys):
    assert cli.main(["validate-config", "--config", write(tmp_path, MAIN)]) == 0
    assert "ok: main" in capsys.readouterr().out


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.update(bogus=1),
        lambda c: c.update(algorithm="qlearning"),
        lambda c: c["env"].update(horizon=0),
        lambda c: c.update(K=4096),  # both K and K_grid
        lambda c: c.pop("env"),
    ],
)
def test_invalid_configs_exit_2(tmp_path, mutate, capsys):
    cfg = json.loads(json.dumps(MAIN))
    mutate(cfg)
    assert cli.main(["validate-config", "--config", write(tmp_path, cfg)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_and_malformed_files(tmp_path):
    assert cli.main(["validate-config", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["validate-config", "--config", str(bad)]) == 2


def test_config_hash_is_canonical():
    shuffled = dict(reversed(list(MAIN.items())))
    assert config_hash(MAIN) == config_hash(shuffled)
    assert validate(MAIN).hash == config_hash(MAIN)


def test_contract_violation_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ContractError("forced")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["run", "--config", write(tmp_path, MAIN), "--out", str(tmp_path)]) == 3


# ---------------------------------------------------------------- runs


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps(MAIN))
    assert cli.main(["run", "--config", str(cfg), "--out", str(d / "a")]) == 0
    assert cli.main(["run", "--config", str(cfg), "--out", str(d / "b")]) == 0
    return d


def test_one_ledger_per_run(sweep_dir):
    csvs = sorted((sweep_dir / "a").glob("main_K*_seed*.csv"))
    assert len(csvs) == 15
    assert len(list((sweep_dir / "a").glob("main_K*_seed*.json"))) == 15
    meta, cols = read_ledger(csvs[0])
    assert meta["config_hash"] == config_hash(MAIN)
    assert set(cols) == {"episode", "stage", "batch_id", "inst_regret", "cum_regret", "survivors"}


def test_reruns_byte_identical(sweep_dir):
    for a in sorted((sweep_dir / "a").glob("*.csv")):
        assert a.read_bytes() == (sweep_dir / "b" / a.name).read_bytes()


def test_plot_data_single_ledger_identity(sweep_dir, tmp_path):
    ledger = sweep_dir / "a" / "main_K1024_seed0.csv"
    assert cli.main(["plot-data", str(ledger), "--out", str(tmp_path)]) == 0
    curves = np.genfromtxt(tmp_path / "curves.csv", delimiter=",", names=True)
    _, cols = read_ledger(ledger)
    assert np.allclose(curves["mean_cum_regret"], cols["cum_regret"], rtol=1e-10)
    assert np.all(curves["stderr_cum_regret"] == 0)


def test_plot_data_identical_ledgers_zero_stderr(sweep_dir, tmp_path):
    a, b = sweep_dir / "a" / "main_K1024_seed0.csv", tmp_path / "copy.csv"
    b.write_bytes(a.read_bytes())
    assert cli.main(["plot-data", str(a), str(b), "--out", str(tmp_path / "o")]) == 0
    curves = np.genfromtxt(tmp_path / "o" / "curves.csv", delimiter=",", names=True)
    assert np.all(curves["stderr_cum_regret"] == 0) and np.all(curves["n_runs"] == 2)


def test_plot_data_slopes(sweep_dir, tmp_path):
    assert cli.main(["plot-data", str(sweep_dir / "a"), "--out", str(tmp_path)]) == 0
    slopes = np.genfromtxt(tmp_path / "slopes.csv", delimiter=",", names=True, dtype=None, encoding=None)
    assert int(slopes["n_K"]) == 3 and np.isfinite(slopes["slope"]) and 0 <= slopes["r2"] <= 1


def test_plot_data_empty_input_exit_2(tmp_path):
    assert cli.main(["plot-data", "--out", str(tmp_path)]) == 2


def test_fit_loglog_exact_power_law():
    K = np.array([1e3, 1e4, 1e5])
    slope, intercept, r2 = fit_loglog(K, 3 * K**0.5)
    assert slope == pytest.approx(0.5) and intercept == pytest.approx(np.log(3)) and r2 == pytest.approx(1)


def test_bandit_and_baseline_configs(tmp_path):
    bandit = {"algorithm": "bandit", "bandit": {"mean_reward": [[0.7, 0.5], [0.5, 0.3]]},
              "K": 1024, "seeds": [0]}
    base = {"algorithm": "baseline_adaptive", "env": {"name": "random_dense"}, "K": 50, "seeds": [0]}
    assert cli.main(["run", "--config", write(tmp_path, bandit, "b.json"), "--out", str(tmp_path)]) == 0
    assert cli.main(["run", "--config", write(tmp_path, base, "c.json"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "bandit_K1024_seed0.csv").is_file()
    assert json.loads((tmp_path / "baseline_adaptive_K50_seed0.json").read_text())["batch_count"] == 50


def test_reward_free_config_with_rewards_file(tmp_path):
    rewards = np.random.default_rng(0).random((3, 2, 2, 2, 2))
    np.save(tmp_path / "r.npy", rewards)
    cfg = {"algorithm": "reward_free", "env": {"name": "random_dense"}, "seeds": [0],
           "reward_free": {"N0": 1000, "N1": 1000, "rewards_file": str(tmp_path / "r.npy")}}
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = np.genfromtxt(tmp_path / "reward_free_seed0.csv", delimiter=",", names=True, skip_header=1)
    assert len(rows) == 3 and np.all(rows["gap_max_player"] >= -1e-9)
    # gap tables are not regret ledgers
    assert cli.main(["plot-data", str(tmp_path), "--out", str(tmp_path / "o")]) == 2


def test_sweep_writes_plot_data(tmp_path):
    cfg = dict(MAIN, K_grid=[1024, 2048], seeds=[0, 1])
    assert cli.main(["sweep", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "s"),
                     "--workers", "2"]) == 0
    assert (tmp_path / "s" / "slopes.csv").is_file()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "batchedmg", "validate-config", "--config",
                           str(tmp_path / "missing.json")], capture_output=True, text=True)
    assert proc.returncode == 2


# ---------------------------------------------------------------- baseline


def test_baseline_one_batch_per_episode():
    g = make_env({"name": "random_dense"}, 0)
    led = baseline_adaptive(g, 40, 0)
    assert led.batch_count == 40 == led.n_episodes
    assert np.all(np.array([b.inst_regret for b in led.batches]) >= 0)


def test_baseline_known_dynamics_zero_regret():
    # single state: the model is exact from the start, so play is Nash from episode one
    g = make_env({"name": "rps_chain", "n_states": 1}, 0)
    assert baseline_adaptive(g, 20, 0).regret == pytest.approx(0.0, abs=1e-6)
