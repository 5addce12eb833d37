"""Linear contextual bandits: index policies, baselines, environments and a
reproducible experiment harness."""

from .envs import (
    ArmSet,
    EndOfOptimismEnv,
    MovieLensReplayEnv,
    RoundRecord,
    SyntheticEnv,
    movielens_load,
)
from .errors import (
    ConfigurationError,
    IngestionError,
    LinBanditError,
    NumericError,
    UsageError,
)
from .harness import (
    AggregateCurve,
    EnvSpec,
    ExperimentSpec,
    Trajectory,
    aggregate,
    base_policy_config,
    derive_run_seed,
    emit_csv,
    emit_plot,
    run_experiment,
    run_one,
    sweep_alpha,
)
from .linalg import RidgeState, ridge_init
from .policies import (
    ArmStats,
    GammaSchedule,
    LinIMED,
    LinTS,
    LinUCB,
    Mode,
    PolicyConfig,
    SupLinIMED,
    UniformRandom,
    beta,
    linimed_indices,
    make_policy,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateCurve",
    "ArmSet",
    "ArmStats",
    "ConfigurationError",
    "EndOfOptimismEnv",
    "EnvSpec",
    "ExperimentSpec",
    "GammaSchedule",
    "IngestionError",
    "LinBanditError",
    "LinIMED",
    "LinTS",
    "LinUCB",
    "Mode",
    "MovieLensReplayEnv",
    "NumericError",
    "PolicyConfig",
    "RidgeState",
    "RoundRecord",
    "SupLinIMED",
    "SyntheticEnv",
    "Trajectory",
    "UniformRandom",
    "UsageError",
    "aggregate",
    "base_policy_config",
    "beta",
    "derive_run_seed",
    "emit_csv",
    "emit_plot",
    "linimed_indices",
    "make_policy",
    "movielens_load",
    "ridge_init",
    "run_experiment",
    "run_one",
    "sweep_alpha",
]
