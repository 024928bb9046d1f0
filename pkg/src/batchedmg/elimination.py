"""Staged policy elimination for the max-player with a pre-declared batch schedule.

The version space is an explicit finite set of Markov max-policies (a simplex
grid plus user extras).  The min-player is never restricted: every ``inf``
over min-policies is an exact best-response computation.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ContractError
from .exploration import ExplorationBudget, crude_exploration, fine_exploration
from .game_model import MarkovGame, MaxPolicy, MixturePolicy
from .solving import best_response_values, nash_value_iteration

log = logging.getLogger(__name__)

DEFAULT_CANDIDATE_CAP = 20000


# ---------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class Stage:
    """Episode counts of one stage; ``T`` is the stage length used in widths."""

    k: int
    crude: int
    fine: int
    aux: int

    @property
    def T(self) -> int:
        return self.fine

    @property
    def episodes(self) -> int:
        return self.crude + self.fine + self.aux


@dataclass(frozen=True)
class StageSchedule:
    K: int
    N: float
    stages: tuple

    @property
    def K0(self) -> int:
        return len(self.stages)

    @property
    def lengths(self) -> list[int]:
        return [st.T for st in self.stages]

    @property
    def total(self) -> int:
        return sum(st.episodes for st in self.stages)


def nominal_length(K: int, k: int) -> int:
    """``floor(K^(1 - 2^-k))`` with an exact integer correction of float round-off."""
    q = 2**k
    x = int(math.floor(K ** (1.0 - 1.0 / q)))
    target = K ** (q - 1)
    while (x + 1) ** q <= target:
        x += 1
    while x > 0 and x**q > target:
        x -= 1
    return x


def make_schedule(K: int, N: float = 2.0, *, min_crude: int = 1) -> StageSchedule:
    """Stage lengths ``T^(k) = floor(K^(1 - 2^-k))``, truncated so the total is exactly ``K``.

    Stages 1 and 2 spend ``T`` crude, ``T`` fine and ``floor(N T)`` auxiliary
    episodes; later stages spend ``T^(k)`` fine episodes plus the stage-2
    auxiliary count.  The stage that would overrun ``K`` is shrunk to fit; if
    nothing useful fits, the leftover episodes extend the previous stage's
    fine phase.
    """
    K = int(K)
    if N <= 0:
        raise ConfigurationError("N must be positive")
    minimum = int((N + 2) * max(math.ceil(math.sqrt(K)), min_crude)) if K > 0 else 1
    if K < 1 or K < minimum:
        raise ConfigurationError(
            f"K={K} is too small: the schedule needs K >= (N+2)*ceil(sqrt(K)) = {minimum}"
        )
    stages: list[Stage] = []
    used = 0
    aux2 = 0
    k = 0
    while used < K:
        k += 1
        T = nominal_length(K, k)
        if k <= 2:
            st = Stage(k, T, T, int(math.floor(N * T)))
        else:
            st = Stage(k, 0, T, aux2)
        R = K - used
        if st.episodes >= R:
            if k <= 2:
                Tp = int(math.floor(R / (N + 2)))
                aux = int(math.floor(N * Tp))
                st = Stage(k, Tp, R - Tp - aux, aux)
                viable = Tp >= min_crude and st.fine >= 1
            else:
                st = Stage(k, 0, R - aux2, aux2)
                viable = st.fine >= 1
            if not viable:
                if not stages:
                    raise ConfigurationError(f"K={K} cannot fit a single stage")
                prev = stages[-1]
                stages[-1] = replace(prev, fine=prev.fine + R)
                used += R
                break
        stages.append(st)
        used += st.episodes
        if k == 2:
            aux2 = st.aux
        if k > 64:
            raise ContractError("schedule did not terminate")
    sched = StageSchedule(K, float(N), tuple(stages))
    if sched.total != K:
        raise ContractError(f"schedule total {sched.total} differs from K={K}")
    return sched


# ---------------------------------------------------------------------------
# version space


@dataclass(frozen=True, eq=False)
class VersionSpace:
    """Finite candidate set of max-policies with an alive mask that only shrinks."""

    candidates: tuple
    alive: np.ndarray
    provenance: tuple

    def __post_init__(self):
        cands = tuple(self.candidates)
        alive = np.array(self.alive, dtype=bool)
        if len(cands) != alive.size or len(self.provenance) != alive.size:
            raise ConfigurationError("candidates, alive mask and provenance must align")
        if not alive.any():
            raise ContractError("a version space needs at least one alive candidate")
        alive.setflags(write=False)
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "alive", alive)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())

    @property
    def alive_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alive)

    def alive_candidates(self) -> list[MaxPolicy]:
        return [self.candidates[i] for i in self.alive_indices]

    def stacked(self, alive_only: bool = False) -> np.ndarray:
        idx = self.alive_indices if alive_only else range(len(self.candidates))
        return np.stack([self.candidates[i].dist for i in idx])

    def index_of(self, policy: MaxPolicy) -> int | None:
        for i, c in enumerate(self.candidates):
            if c == policy:
                return i
        return None

    def restrict(self, keep: np.ndarray) -> "VersionSpace":
        """Turn off candidates outside ``keep`` (never turns one back on)."""
        return VersionSpace(self.candidates, self.alive & np.asarray(keep, bool), self.provenance)

    def with_candidate(self, policy: MaxPolicy, provenance: str, alive: bool) -> tuple["VersionSpace", int]:
        """Add ``policy`` unless already present; returns the space and its index."""
        idx = self.index_of(policy)
        if idx is not None:
            return self, idx
        return (
            VersionSpace(
                self.candidates + (policy,),
                np.append(self.alive, alive),
                self.provenance + (provenance,),
            ),
            len(self.candidates),
        )


def simplex_grid(n_actions: int, resolution: int) -> np.ndarray:
    """All distributions over ``n_actions`` with entries in multiples of ``1/resolution``."""
    pts = [
        c
        for c in itertools.product(range(resolution + 1), repeat=n_actions)
        if sum(c) == resolution
    ]
    return np.array(sorted(pts, reverse=True), dtype=float) / resolution


def init_version_space(dims, grid_resolution: int, extra=(), *, cap: int = DEFAULT_CANDIDATE_CAP) -> VersionSpace:
    """All Markov max-policies on the simplex grid, plus ``extra`` policies, deduplicated."""
    H, S, A = (int(d) for d in tuple(dims)[:3])
    if grid_resolution < 1:
        raise ConfigurationError("grid_resolution must be at least 1")
    pts = simplex_grid(A, grid_resolution)
    n_rows = H * S
    count = len(pts) ** n_rows
    if count + len(extra) > cap:
        raise ConfigurationError(
            f"{count} grid candidates exceed the cap of {cap}; use smaller dims or grid_resolution"
        )
    cands, prov, seen = [], [], set()
    for combo in itertools.product(range(len(pts)), repeat=n_rows):
        pol = MaxPolicy(pts[list(combo)].reshape(H, S, A))
        seen.add(pol)
        cands.append(pol)
        prov.append("grid")
    for pol in extra:
        if pol.shape != (H, S, A):
            raise ConfigurationError(f"extra policy shape {pol.shape} does not match {(H, S, A)}")
        if pol not in seen:
            seen.add(pol)
            cands.append(pol)
            prov.append("user")
    return VersionSpace(tuple(cands), np.ones(len(cands), dtype=bool), tuple(prov))


# ---------------------------------------------------------------------------
# constants and elimination


@dataclass(frozen=True)
class AlgorithmConstants:
    """Universal constants of the elimination rule (calibration choices).

    ``bias_scale`` multiplies the lower-order term of the width; 1 is the
    textbook form.
    """

    C: float = 0.05
    C1: float = 1.0
    N: float = 2.0
    delta: float = 0.1
    bias_scale: float = 1.0

    def __post_init__(self):
        if self.C <= 0 or self.C1 <= 0 or self.N <= 0:
            raise ConfigurationError("C, C1 and N must be positive")
        if not 0 < self.delta < 1:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.bias_scale < 0:
            raise ConfigurationError("bias_scale must be nonnegative")

    def iota(self, dims, K: int) -> float:
        H, S, A, B = dims
        return math.log(2 * H * S * A * B * K / self.delta)

    def width(self, dims, iota: float, T_k: int, T_bias: int) -> float:
        """``2C (sqrt(H^3 S^2 A B iota / T_k) + bias * H^5 S^3 A^2 B^2 iota / T_bias)``."""
        H, S, A, B = dims
        lead = math.sqrt(H**3 * S**2 * A * B * iota / T_k)
        bias = self.bias_scale * H**5 * S**3 * A**2 * B**2 * iota / T_bias
        return 2.0 * self.C * (lead + bias)


def elimination_scores(vs: VersionSpace, model, reward) -> np.ndarray:
    """Best-response value of every candidate under ``model`` (NaN for dead ones)."""
    g = np.full(len(vs), np.nan)
    idx = vs.alive_indices
    g[idx] = best_response_values(model, reward, vs.stacked(alive_only=True))
    return g


def eliminate(vs: VersionSpace, model, reward, width: float) -> VersionSpace:
    """Keep alive candidates whose best-response value is within ``width`` of the best."""
    if width < 0:
        raise ConfigurationError("width must be nonnegative")
    g = elimination_scores(vs, model, reward)
    top = np.nanmax(g)
    keep = vs.alive & (g >= top - width)
    return vs.restrict(keep)


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class BatchRecord:
    batch_id: int
    stage: int
    label: str
    start: int
    n_episodes: int
    inst_regret: float
    survivors: int


@dataclass(eq=False)
class RunLedger:
    """Per-batch record of a run; per-episode views are derived on demand."""

    K: int
    horizon: int
    seed: int | None
    batches: list = field(default_factory=list)
    stages: list = field(default_factory=list)
    schedule: StageSchedule | None = None
    final_space: VersionSpace | None = None
    nash_value: float = float("nan")
    final_gap: float = float("nan")
    wall_clock: float = 0.0
    flags: list = field(default_factory=list)
    stage_models: list = field(default_factory=list)

    def add_batch(self, stage: int, label: str, n_episodes: int, inst_regret: float, survivors: int):
        if n_episodes <= 0:
            return
        start = self.n_episodes
        inst = float(inst_regret)
        if inst < 0:
            if inst < -1e-9:
                raise ContractError(f"negative regret {inst}")
            inst = 0.0
        self.batches.append(BatchRecord(len(self.batches), stage, label, start, int(n_episodes), inst, survivors))

    @property
    def n_episodes(self) -> int:
        return sum(b.n_episodes for b in self.batches)

    @property
    def batch_count(self) -> int:
        return len(self.batches)

    @property
    def batch_boundaries(self) -> list[int]:
        """Episode indices at which a new deployment starts."""
        return [b.start for b in self.batches]

    @property
    def K0(self) -> int:
        return self.schedule.K0 if self.schedule is not None else len(self.stages)

    def episode_arrays(self) -> dict:
        reps = [b.n_episodes for b in self.batches]
        inst = np.repeat([b.inst_regret for b in self.batches], reps)
        return {
            "episode": np.arange(inst.size),
            "stage": np.repeat([b.stage for b in self.batches], reps),
            "batch_id": np.repeat([b.batch_id for b in self.batches], reps),
            "inst_regret": inst,
            "cum_regret": np.cumsum(inst),
            "survivors": np.repeat([b.survivors for b in self.batches], reps),
        }

    @property
    def regret(self) -> float:
        return float(sum(b.inst_regret * b.n_episodes for b in self.batches))

    def to_csv(self, path, config_hash: str = "") -> None:
        cols = self.episode_arrays()
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={config_hash} seed={self.seed}\n")
            fh.write("episode,stage,batch_id,inst_regret,cum_regret,survivors\n")
            for e, st, b, ir, cr, sv in zip(*(cols[c].tolist() for c in cols)):
                fh.write(f"{e},{st},{b},{ir:.12g},{cr:.12g},{sv}\n")

    def summary(self) -> dict:
        return {
            "K": self.K,
            "K0": self.K0,
            "batch_count": self.batch_count,
            "regret": self.regret,
            "final_gap": self.final_gap,
            "nash_value": self.nash_value,
            "seed": self.seed,
            "stages": self.stages,
            "flags": self.flags,
            "wall_clock_s": self.wall_clock,
        }


def _clamp_gap(g: float) -> float:
    """Round-off below zero becomes 0; larger negative gaps are kept so they stay visible."""
    return 0.0 if -1e-9 < g < 0.0 else g


class GapOracle:
    """Cached exact gaps ``V* - V^{mu, dagger}`` on the true game."""

    def __init__(self, game: MarkovGame, reward=None):
        self.game = game
        self.reward = reward
        self.nash_value = nash_value_iteration(game, reward).initial_value
        self._cache: dict[bytes, float] = {}

    def gaps(self, policies) -> np.ndarray:
        keys = [p.dist.tobytes() for p in policies]
        missing = {k: p for k, p in zip(keys, policies) if k not in self._cache}
        if missing:
            mus = np.stack([p.dist for p in missing.values()])
            vals = best_response_values(self.game, self.reward, mus)
            for k, v in zip(missing, vals):
                self._cache[k] = _clamp_gap(float(self.nash_value - v))
        return np.array([self._cache[k] for k in keys])

    def gap(self, policy: MaxPolicy) -> float:
        return float(self.gaps([policy])[0])

    def mixture_gap(self, policy: MixturePolicy) -> float:
        gaps = self.gaps([mu for mu, _ in policy.components])
        return float(policy.weights @ gaps)


def _inject_empirical_nash(vs, model, reward, history):
    """Add the empirical Nash max-policy, alive only if it passes every earlier test."""
    mu_hat = nash_value_iteration(model, reward).max_strategy
    alive = True
    for old_model, width, top in history:
        g = best_response_values(old_model, reward, mu_hat.dist)
        if g < top - width:
            alive = False
            break
    return vs.with_candidate(mu_hat, "empirical-nash", alive)


def run_main(
    game: MarkovGame,
    K: int,
    constants: AlgorithmConstants,
    vs0: VersionSpace,
    seed,
    *,
    reward=None,
    inject_empirical_nash: bool = True,
    design_tol: float = 1e-4,
    track: MaxPolicy | None = None,
    keep_models: bool = False,
) -> RunLedger:
    """Run the staged elimination algorithm for exactly ``K`` episodes.

    Every executed episode is charged the exact expected gap of the deployed
    policy's max-player component(s) on the true game.  ``track`` is an
    optional policy whose survival is recorded per stage.  With
    ``keep_models`` the ledger keeps ``(model, width, version space before
    elimination)`` per stage for offline checks.
    """
    t_start = time.perf_counter()
    rng = np.random.default_rng(seed)
    dims = game.dims
    H = game.horizon
    if vs0.candidates[0].shape != (H, game.n_states, game.n_actions_max):
        raise ConfigurationError("version space does not match the game dimensions")
    reward = game.reward if reward is None else reward
    sched = make_schedule(K, constants.N, min_crude=H)
    iota = constants.iota(dims, K)
    oracle = GapOracle(game, reward)
    ledger = RunLedger(K, H, seed if isinstance(seed, (int, np.integer)) else None, schedule=sched)
    ledger.nash_value = oracle.nash_value
    vs = vs0
    history = []
    crude2 = None
    T_bias = None
    for st in sched.stages:
        n_alive_before = vs.n_alive
        if st.k <= 2:
            budget = ExplorationBudget(st.crude, H, iota, constants.C1, constants.N, constants.delta)
            crude = crude_exploration(game, vs, budget, rng)
            for dep in crude.deployments:
                ledger.add_batch(st.k, dep.label, dep.n_episodes, oracle.mixture_gap(dep.policy), n_alive_before)
            if st.k == 2:
                crude2 = crude
        else:
            crude = crude2
        fine_budget = ExplorationBudget(st.fine, H, iota, constants.C1, constants.N, constants.delta)
        fine = fine_exploration(game, crude, vs, fine_budget, crude.uniform_explorer, st.aux, rng, tol=design_tol)
        for dep in fine.deployments:
            ledger.add_batch(st.k, dep.label, dep.n_episodes, oracle.mixture_gap(dep.policy), n_alive_before)
        if st.k <= 2:
            T_bias = st.T
        width = constants.width(dims, iota, st.T, T_bias)
        injected = None
        if inject_empirical_nash:
            vs, injected = _inject_empirical_nash(vs, fine.model, reward, history)
        if keep_models:
            ledger.stage_models.append((fine.model, width, vs))
        g = elimination_scores(vs, fine.model, reward)
        top = float(np.nanmax(g))
        vs = vs.restrict(vs.alive & (g >= top - width))
        history.append((fine.model, width, top))
        info = {
            "stage": st.k,
            "T": st.T,
            "crude": st.crude,
            "aux": st.aux,
            "width": width,
            "alive_before": n_alive_before,
            "alive_after": vs.n_alive,
            "max_score": top,
            "design_objective": fine.objective,
            "infrequent": len(crude.infrequent),
        }
        if injected is not None:
            info["injected_alive"] = bool(vs.alive[injected])
        if track is not None:
            ti = vs.index_of(track)
            info["tracked_alive"] = bool(ti is not None and vs.alive[ti])
        ledger.stages.append(info)
        log.info("stage %d: T=%d width=%.4g alive %d -> %d", st.k, st.T, width, n_alive_before, vs.n_alive)
    ledger.final_space = vs
    ledger.final_gap = oracle.gap(extract_pac_policy(vs))
    ledger.wall_clock = time.perf_counter() - t_start
    if ledger.n_episodes != K:
        raise ContractError(f"ran {ledger.n_episodes} episodes instead of {K}")
    return ledger


def extract_pac_policy(result) -> MaxPolicy:
    """First alive candidate of the final version space (a Markov policy)."""
    vs = result.final_space if isinstance(result, RunLedger) else result
    if vs is None:
        raise ContractError("run has no final version space")
    return vs.candidates[int(vs.alive_indices[0])]
