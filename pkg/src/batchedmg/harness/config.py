"""Experiment configuration: JSON files validated against ``config_schema.json``."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from ..elimination import AlgorithmConstants
from ..errors import ConfigurationError
from ..game_model import EnvSpec

ALGORITHMS = ("main", "bandit", "reward_free", "baseline_adaptive")


def load_schema() -> dict:
    text = resources.files(__package__).joinpath("config_schema.json").read_text()
    return json.loads(text)


def config_hash(raw: dict) -> str:
    """Short hash of the canonical JSON form of a configuration."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    seeds: tuple
    K_grid: tuple
    env: EnvSpec | None
    env_seed: int
    bandit_means: tuple | None
    bandit_noise: str
    constants: AlgorithmConstants
    grid_resolution: int
    candidate_cap: int
    include_nash: bool
    inject_empirical_nash: bool
    reward_free: dict
    output_dir: str
    tolerances: dict
    raw: dict = field(repr=False, compare=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def validate(raw: dict) -> ExperimentConfig:
    """Schema-check ``raw`` and apply the cross-field rules the schema cannot express."""
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"invalid config at {where}: {exc.message}") from None
    algo = raw["algorithm"]
    if algo == "bandit":
        if "bandit" not in raw:
            raise ConfigurationError("bandit runs need a 'bandit' section")
        rows = raw["bandit"]["mean_reward"]
        if len({len(r) for r in rows}) != 1:
            raise ConfigurationError("bandit mean_reward rows must have equal length")
    elif "env" not in raw:
        raise ConfigurationError(f"{algo} runs need an 'env' section")
    if "K" in raw and "K_grid" in raw:
        raise ConfigurationError("give either K or K_grid, not both")
    if algo != "reward_free" and "K" not in raw and "K_grid" not in raw:
        raise ConfigurationError(f"{algo} runs need K or K_grid")
    K_grid = tuple(raw["K_grid"]) if "K_grid" in raw else ((raw["K"],) if "K" in raw else ())
    rf = dict(raw.get("reward_free", {}))
    if algo == "reward_free" and "epsilon" not in rf and not {"N0", "N1"} <= rf.keys():
        raise ConfigurationError("reward_free runs need epsilon or both N0 and N1")
    env = None
    if "env" in raw:
        env_raw = {k: v for k, v in raw["env"].items() if k != "seed"}
        env = EnvSpec.from_dict(env_raw)
    try:
        constants = AlgorithmConstants(**raw.get("constants", {}))
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    return ExperimentConfig(
        algorithm=algo,
        seeds=tuple(raw["seeds"]),
        K_grid=K_grid,
        env=env,
        env_seed=int(raw.get("env", {}).get("seed", 0)),
        bandit_means=tuple(map(tuple, raw["bandit"]["mean_reward"])) if "bandit" in raw else None,
        bandit_noise=raw.get("bandit", {}).get("noise", "bernoulli"),
        constants=constants,
        grid_resolution=int(raw.get("grid_resolution", 4)),
        candidate_cap=int(raw.get("candidate_cap", 20000)),
        include_nash=bool(raw.get("include_nash", True)),
        inject_empirical_nash=bool(raw.get("inject_empirical_nash", True)),
        reward_free=rf,
        output_dir=raw.get("output_dir", "runs"),
        tolerances=dict(raw.get("tolerances", {})),
        raw=raw,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    return validate(raw)
