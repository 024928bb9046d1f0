"""Low-adaptivity self-play for tabular two-player zero-sum Markov games."""

from .absorbing import (
    CountTable,
    EstimatedModel,
    InfrequentSet,
    build_absorbing,
    check_multiplicative_accuracy,
    estimate_transition,
)
from .bandits import BanditGame, PolytopeVersionSpace, explorative_max_policy, lp_max_min, run_bandit
from .elimination import (
    AlgorithmConstants,
    RunLedger,
    StageSchedule,
    VersionSpace,
    eliminate,
    extract_pac_policy,
    init_version_space,
    make_schedule,
    run_main,
)
from .errors import ConfigurationError, ContractError, DataError, NumericError
from .exploration import (
    CrudeResult,
    ExplorationBudget,
    crude_exploration,
    design_mixture,
    fine_exploration,
)
from .game_model import (
    EnvSpec,
    MarkovGame,
    MaxPolicy,
    MinPolicy,
    MixturePolicy,
    RewardFunction,
    Trajectory,
    indicator_reward,
    make_env,
    sample_episode,
)
from .reward_free import RewardFreeBudget, extract_nash_pair, run_reward_free
from .solving import (
    NashSolution,
    ValueTable,
    best_response_value,
    nash_value_iteration,
    policy_pair_value,
    solve_matrix_game,
    visitation_probability,
)

__version__ = "0.1.0"
