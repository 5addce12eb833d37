"""Experiment runner: seeding, interaction loop, alpha sweeps, aggregation
and CSV/plot output. Every run is reproducible from (spec, base_seed); the
per-run seed depends only on the policy label, grid position and repeat
index, never on execution order, so any parallelism level produces the same
bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import EndOfOptimismEnv, RoundRecord, SyntheticEnv, movielens_load
from .errors import ConfigurationError, UsageError
from .policies import GammaSchedule, Mode, PolicyConfig, make_policy

DEFAULT_ALPHA_GRID = [round(0.05 * i, 2) for i in range(1, 21)]   # 0.05 .. 1.0

# per-environment defaults for the number of repeated runs
DEFAULT_REPEATS = {"synthetic": 50, "eoo": 10, "movielens": 100}

# best alpha per policy after grid search at T=1000 (synthetic K=10 d=2 and
# replay K=20); the fixed-arm instance reuses the synthetic values
TUNED_ALPHA = {
    "synthetic": {
        Mode.LINUCB: 0.55,
        Mode.LINTS: 0.25,
        Mode.LINIMED1: 0.2,
        Mode.LINIMED2: 0.25,
        Mode.LINIMED3: 0.2,
        Mode.SUPLINIMED: 1.0,
        Mode.UNIFORM: 1.0,
    },
    "movielens": {
        Mode.LINUCB: 0.75,
        Mode.LINTS: 0.1,
        Mode.LINIMED1: 0.2,
        Mode.LINIMED2: 0.2,
        Mode.LINIMED3: 0.25,
        Mode.SUPLINIMED: 1.0,
        Mode.UNIFORM: 1.0,
    },
}
TUNED_ALPHA["eoo"] = TUNED_ALPHA["synthetic"]


@dataclass(frozen=True)
class EnvSpec:
    """Declarative environment description (kept serializable for manifests)."""

    kind: str                     # synthetic | eoo | movielens
    K: int = 10
    d: int = 2
    noise_R: float = 0.1
    epsilon: float = 0.01
    ratings_path: str | None = None
    min_ratings: int = 1
    factor_seed: int = 0

    def build(self):
        if self.kind == "synthetic":
            return SyntheticEnv(K=self.K, d=self.d, noise_R=self.noise_R)
        if self.kind == "eoo":
            return EndOfOptimismEnv(epsilon=self.epsilon, noise_R=self.noise_R)
        if self.kind == "movielens":
            if self.ratings_path is None:
                raise ConfigurationError("movielens environment needs a ratings file")
            rank = int(round(np.sqrt(self.d)))
            if rank * rank != self.d:
                raise ConfigurationError(
                    f"replay context dimension must be a perfect square, got {self.d}"
                )
            return movielens_load(
                self.ratings_path,
                rank=rank,
                K=self.K,
                min_ratings=self.min_ratings,
                seed=self.factor_seed,
            )
        raise ConfigurationError(f"unknown environment kind {self.kind!r}")


def base_policy_config(env_kind: str, mode: Mode, horizon_T: int, alpha: float | None = None) -> PolicyConfig:
    """Policy configuration preset for an environment family.

    Synthetic and fixed-arm instances use lam=2, L=sqrt(2), S=1, R=0.1 with
    gamma = 1/(1+s)^2 at radius index s; replay uses lam=20, L=sqrt(20) with
    gamma = 1/s^2. In both cases lam = L^2.
    """
    if alpha is None:
        alpha = TUNED_ALPHA[env_kind][mode]
    if env_kind in ("synthetic", "eoo"):
        return PolicyConfig(
            mode=mode,
            lam=2.0,
            bound_S=1.0,
            bound_L=float(np.sqrt(2.0)),
            noise_R=0.1,
            gamma_schedule=GammaSchedule.inverse_one_plus_t_squared(),
            alpha_scale=alpha,
            constant_C=30.0,
            horizon_T=horizon_T,
        )
    if env_kind == "movielens":
        return PolicyConfig(
            mode=mode,
            lam=20.0,
            bound_S=1.0,
            bound_L=float(np.sqrt(20.0)),
            noise_R=0.1,
            gamma_schedule=GammaSchedule.inverse_t_squared(),
            alpha_scale=alpha,
            constant_C=30.0,
            horizon_T=horizon_T,
        )
    raise ConfigurationError(f"unknown environment kind {env_kind!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    env: EnvSpec
    policies: list[PolicyConfig]
    horizon_T: int
    repeats: int
    base_seed: int
    alpha_grid: list[float] | None = None
    metric: str = "regret"        # regret | ctr

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigurationError(f"repeats must be >= 1, got {self.repeats}")
        if self.alpha_grid is not None:
            if len(set(self.alpha_grid)) != len(self.alpha_grid):
                raise ConfigurationError("alpha_grid entries must be distinct")
            if any(a <= 0 for a in self.alpha_grid):
                raise ConfigurationError("alpha_grid entries must be positive")

    def to_dict(self) -> dict:
        return {
            "env": vars(self.env) | {},
            "policies": [
                {
                    "mode": c.mode.value,
                    "lam": c.lam,
                    "bound_S": c.bound_S,
                    "bound_L": c.bound_L,
                    "noise_R": c.noise_R,
                    "gamma_schedule": c.gamma_schedule.kind,
                    "gamma_value": c.gamma_schedule.value,
                    "alpha_scale": c.alpha_scale,
                    "constant_C": c.constant_C,
                    "horizon_T": c.horizon_T,
                }
                for c in self.policies
            ],
            "horizon_T": self.horizon_T,
            "repeats": self.repeats,
            "base_seed": self.base_seed,
            "alpha_grid": self.alpha_grid,
            "metric": self.metric,
        }


@dataclass
class Trajectory:
    """Per-round metric values of one run plus the contexts it chose."""

    label: str
    seed: int
    values: np.ndarray            # length T; cumulative regret or running CTR
    contexts: np.ndarray          # (T, d) chosen contexts
    final: float = field(init=False)

    def __post_init__(self):
        self.final = float(self.values[-1]) if len(self.values) else 0.0


@dataclass
class AggregateCurve:
    """Pointwise mean and sample standard deviation across repeats."""

    label: str
    mean: np.ndarray
    std: np.ndarray
    n: int


def derive_run_seed(base_seed: int, label: str, alpha_index: int, repeat: int) -> int:
    """Stable 64-bit seed from (base seed, policy label, grid index, repeat)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q", base_seed))
    h.update(label.encode())
    h.update(struct.pack("<qq", alpha_index, repeat))
    return int.from_bytes(h.digest(), "little")


def run_one(env, cfg: PolicyConfig, T: int, seed: int, trace: bool = False):
    """Run one full interaction loop; deterministic given the seed.

    Returns a Trajectory, or (Trajectory, [RoundRecord]) when ``trace``.
    """
    ss = np.random.SeedSequence(seed)
    env_ss, pol_ss = ss.spawn(2)
    env_rng = np.random.Generator(np.random.PCG64(env_ss))
    pol_rng = np.random.Generator(np.random.PCG64(pol_ss))

    policy = make_policy(env.dim, cfg, pol_rng)
    values = np.empty(T)
    contexts = np.empty((T, env.dim))
    records: list[RoundRecord] = []
    cum = 0.0
    for t in range(1, T + 1):
        try:
            arms = env.arm_set(t, env_rng)
            expected = env.expected_rewards(arms)
            arm_id = policy.select(arms)
            pos = policy.last_position
            reward = env.reward(arms, pos, env_rng)
            policy.observe(arms.features[pos], reward)
        except Exception as e:
            try:
                wrapped = type(e)(f"round {t}: {e}")
            except Exception:
                raise e
            raise wrapped from e
        contexts[t - 1] = arms.features[pos]
        if env.metric == "ctr":
            cum += reward
            values[t - 1] = cum / t
        else:
            regret = float(np.max(expected) - expected[pos])
            cum += regret
            values[t - 1] = cum
        if trace:
            records.append(
                RoundRecord(
                    t=t,
                    arm_id=arm_id,
                    reward=float(reward),
                    expected_reward=float(expected[pos]),
                    regret=float(np.max(expected) - expected[pos]),
                    best_arm_id=int(arms.arm_ids[np.argmax(expected)]),
                )
            )
    traj = Trajectory(label=cfg.mode.value, seed=seed, values=values, contexts=contexts)
    return (traj, records) if trace else traj


@dataclass
class RunResult:
    spec: ExperimentSpec
    trajectories: dict[str, list[Trajectory]]       # label -> one per repeat
    curves: dict[str, AggregateCurve]


def _run_tasks(tasks, jobs: int):
    """Execute (key, thunk) pairs, returning {key: result} independent of order."""
    if jobs <= 1:
        return {key: thunk() for key, thunk in tasks}
    out = {}
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        futures = {key: ex.submit(thunk) for key, thunk in tasks}
        for key, fut in futures.items():
            out[key] = fut.result()
    return out


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> RunResult:
    """Run repeats for every configured policy and aggregate the curves."""
    env = spec.env.build()
    tasks = []
    for cfg in spec.policies:
        label = cfg.mode.value
        for rep in range(spec.repeats):
            seed = derive_run_seed(spec.base_seed, label, 0, rep)
            tasks.append(
                ((label, rep), (lambda c=cfg, s=seed: run_one(env, c, spec.horizon_T, s)))
            )
    results = _run_tasks(tasks, jobs)

    trajectories: dict[str, list[Trajectory]] = {}
    for cfg in spec.policies:
        label = cfg.mode.value
        trajectories[label] = [results[(label, rep)] for rep in range(spec.repeats)]
    curves = {label: aggregate(runs) for label, runs in trajectories.items()}
    return RunResult(spec=spec, trajectories=trajectories, curves=curves)


@dataclass
class SweepRow:
    label: str
    alpha: float
    final_mean: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    best: dict[str, float]        # label -> best alpha


def sweep_alpha(spec: ExperimentSpec, jobs: int = 1) -> SweepResult:
    """Grid-search the width multiplier for every policy.

    Best = lowest final mean regret, or highest final mean CTR. Grid order
    breaks ties (first wins).
    """
    if not spec.alpha_grid:
        raise ConfigurationError("sweep requires a nonempty alpha_grid")
    env = spec.env.build()
    tasks = []
    for cfg in spec.policies:
        label = cfg.mode.value
        for ai, alpha in enumerate(spec.alpha_grid):
            acfg = cfg.with_alpha(alpha)
            for rep in range(spec.repeats):
                seed = derive_run_seed(spec.base_seed, label, ai, rep)
                tasks.append(
                    (
                        (label, ai, rep),
                        (lambda c=acfg, s=seed: run_one(env, c, spec.horizon_T, s)),
                    )
                )
    results = _run_tasks(tasks, jobs)

    rows: list[SweepRow] = []
    best: dict[str, float] = {}
    for cfg in spec.policies:
        label = cfg.mode.value
        finals = []
        for ai, alpha in enumerate(spec.alpha_grid):
            mean_final = float(
                np.mean([results[(label, ai, rep)].final for rep in range(spec.repeats)])
            )
            rows.append(SweepRow(label=label, alpha=alpha, final_mean=mean_final))
            finals.append(mean_final)
        finals = np.asarray(finals)
        pick = int(np.argmax(finals)) if spec.metric == "ctr" else int(np.argmin(finals))
        best[label] = spec.alpha_grid[pick]
    return SweepResult(rows=rows, best=best)


def aggregate(trajectories: list[Trajectory]) -> AggregateCurve:
    """Pointwise mean and sample (n-1) standard deviation."""
    if not trajectories:
        raise UsageError("no trajectories to aggregate")
    lengths = {len(t.values) for t in trajectories}
    if len(lengths) != 1:
        raise UsageError(f"trajectories have mixed lengths {sorted(lengths)}")
    stacked = np.stack([t.values for t in trajectories])
    mean = stacked.mean(axis=0)
    n = stacked.shape[0]
    std = stacked.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    return AggregateCurve(label=trajectories[0].label, mean=mean, std=std, n=n)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

CSV_HEADER = "round,policy,mean,std,n"


def emit_csv(curves: list[AggregateCurve], path: str | Path) -> None:
    """Write `round,policy,mean,std,n` rows; floats use repr for exact round-trip."""
    if not curves:
        raise UsageError("no curves to write")
    path = Path(path)
    lines = [CSV_HEADER]
    for curve in curves:
        for i in range(len(curve.mean)):
            lines.append(f"{i + 1},{curve.label},{curve.mean[i]!r},{curve.std[i]!r},{curve.n}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path: str | Path) -> list[AggregateCurve]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise UsageError(f"unexpected curve CSV header in {path}")
    by_label: dict[str, list[tuple[int, float, float, int]]] = {}
    for line in lines[1:]:
        r, label, mean, std, n = line.split(",")
        by_label.setdefault(label, []).append((int(r), float(mean), float(std), int(n)))
    curves = []
    for label, rows in by_label.items():
        rows.sort()
        curves.append(
            AggregateCurve(
                label=label,
                mean=np.array([r[1] for r in rows]),
                std=np.array([r[2] for r in rows]),
                n=rows[0][3],
            )
        )
    return curves


def emit_sweep_csv(sweep: SweepResult, path: str | Path) -> None:
    lines = ["policy,alpha,final_mean,best"]
    for row in sweep.rows:
        is_best = int(sweep.best[row.label] == row.alpha)
        lines.append(f"{row.label},{row.alpha!r},{row.final_mean!r},{is_best}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_plot(curves: list[AggregateCurve], path: str | Path, metric: str = "regret") -> None:
    """Render mean curves with +-1 std bands to a static image."""
    if not curves:
        raise UsageError("no curves to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for curve in curves:
        x = np.arange(1, len(curve.mean) + 1)
        ax.plot(x, curve.mean, label=curve.label)
        ax.fill_between(x, curve.mean - curve.std, curve.mean + curve.std, alpha=0.2)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret" if metric == "regret" else "CTR")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_manifest(spec: ExperimentSpec, path: str | Path, extra: dict | None = None) -> None:
    """Provenance record: full spec, seed scheme and library versions."""
    import matplotlib
    import scipy

    from . import __version__

    payload = {
        "spec": spec.to_dict(),
        "seed_scheme": "blake2b(base_seed, policy_label, alpha_index, repeat)",
        "versions": {
            "linbandit": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "matplotlib": matplotlib.__version__,
        },
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
