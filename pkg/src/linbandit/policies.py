"""Arm-selection policies.

LinIMED-1/2/3 score every arm with an index combining a squared empirical
gap over a variance proxy (exploitation) and the negative log of that proxy
(exploration), then pull the argmin. SupLinIMED wraps the same index in a
phase-layered elimination scheme with per-level observation sets so that
each level's estimates are independent of the actions chosen from them.
LinUCB and LinTS are the standard optimistic and posterior-sampling
baselines over the same ridge machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ConfigurationError, UsageError
from .linalg import RidgeState, ridge_init


class Mode(str, Enum):
    LINIMED1 = "linimed1"
    LINIMED2 = "linimed2"
    LINIMED3 = "linimed3"
    LINUCB = "linucb"
    LINTS = "lints"
    SUPLINIMED = "suplinimed"
    UNIFORM = "uniform"   # non-learning baseline for replay comparisons


LINIMED_MODES = (Mode.LINIMED1, Mode.LINIMED2, Mode.LINIMED3)


@dataclass(frozen=True)
class GammaSchedule:
    """Concentration parameter as a function of the confidence-radius time index.

    ``inverse_t_squared``           gamma(s) = 1/s^2   (gamma(0) capped at 1)
    ``inverse_one_plus_t_squared``  gamma(s) = 1/(1+s)^2
    ``constant``                    gamma(s) = value
    """

    kind: str
    value: float | None = None

    @classmethod
    def inverse_t_squared(cls) -> "GammaSchedule":
        return cls("inverse_t_squared")

    @classmethod
    def inverse_one_plus_t_squared(cls) -> "GammaSchedule":
        return cls("inverse_one_plus_t_squared")

    @classmethod
    def constant(cls, value: float) -> "GammaSchedule":
        if not value > 0:
            raise ConfigurationError(f"gamma must be positive, got {value}")
        return cls("constant", float(value))

    def value_at(self, s: int) -> float:
        if self.kind == "inverse_t_squared":
            return 1.0 if s == 0 else 1.0 / (s * s)
        if self.kind == "inverse_one_plus_t_squared":
            return 1.0 / ((1 + s) * (1 + s))
        if self.kind == "constant":
            return float(self.value)
        raise ConfigurationError(f"unknown gamma schedule {self.kind!r}")


@dataclass(frozen=True)
class PolicyConfig:
    """All tunables of the index policies and baselines."""

    mode: Mode
    lam: float = 1.0
    bound_S: float = 1.0
    bound_L: float = 1.0
    noise_R: float = 0.1
    gamma_schedule: GammaSchedule = field(default_factory=GammaSchedule.inverse_t_squared)
    alpha_scale: float = 1.0
    constant_C: float = 30.0
    horizon_T: int = 1000

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigurationError(f"lam must be positive, got {self.lam}")
        if not self.bound_S > 0 or not self.bound_L > 0:
            raise ConfigurationError("bound_S and bound_L must be positive")
        if not self.noise_R > 0:
            raise ConfigurationError(f"noise_R must be positive, got {self.noise_R}")
        if self.alpha_scale < 0:
            raise ConfigurationError(f"alpha_scale must be >= 0, got {self.alpha_scale}")
        if self.constant_C < 1:
            raise ConfigurationError(f"constant_C must be >= 1, got {self.constant_C}")
        if self.horizon_T < 1:
            raise ConfigurationError(f"horizon_T must be >= 1, got {self.horizon_T}")

    def with_alpha(self, alpha: float) -> "PolicyConfig":
        return replace(self, alpha_scale=alpha)


def beta(t_minus_1: int, dim: int, cfg: PolicyConfig) -> float:
    """Squared confidence radius at time index t-1.

    (R * sqrt(d * log((1 + (t-1) L^2 / lam) / gamma)) + sqrt(lam) * S)^2
    with gamma taken from the schedule at the same index. Nondecreasing in t
    for the built-in schedules.
    """
    if t_minus_1 < 0:
        raise UsageError(f"time index must be >= 0, got {t_minus_1}")
    gamma = cfg.gamma_schedule.value_at(t_minus_1)
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    arg = (1.0 + t_minus_1 * cfg.bound_L**2 / cfg.lam) / gamma
    # gamma <= 1 keeps the log argument >= 1; clamp guards constant gamma > 1
    log_term = max(math.log(arg), 0.0)
    root = cfg.noise_R * math.sqrt(dim * log_term) + math.sqrt(cfg.lam) * cfg.bound_S
    return root * root


@dataclass
class ArmStats:
    """Per-arm scoring snapshot for one round."""

    arm_id: int
    mean: float
    ucb: float
    width_sq: float
    gap: float
    index: float


@dataclass
class ScoreTable:
    """Column-wise per-round arm scores (cheaper than one object per arm)."""

    arm_ids: np.ndarray
    means: np.ndarray
    ucbs: np.ndarray
    widths_sq: np.ndarray
    gaps: np.ndarray
    indices: np.ndarray

    def rows(self) -> list[ArmStats]:
        return [
            ArmStats(int(a), float(m), float(u), float(w), float(g), float(i))
            for a, m, u, w, g, i in zip(
                self.arm_ids, self.means, self.ucbs, self.widths_sq, self.gaps, self.indices
            )
        ]


def argmin_lowest_id(values: np.ndarray, arm_ids: np.ndarray) -> int:
    """Position of the minimum value; ties go to the smallest arm id."""
    best = np.min(values)
    tied = np.flatnonzero(values == best)
    if len(tied) == 1:
        return int(tied[0])
    return int(tied[np.argmin(arm_ids[tied])])


def argmax_lowest_id(values: np.ndarray, arm_ids: np.ndarray) -> int:
    return argmin_lowest_id(-values, arm_ids)


def linimed_indices(
    means: np.ndarray,
    ucbs: np.ndarray,
    widths_sq: np.ndarray,
    mode: Mode,
    *,
    horizon_T: int,
    constant_C: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Indices for one round of a LinIMED mode.

    ``widths_sq`` is the already alpha-scaled variance proxy
    alpha^2 * beta * ||x||^2_{V^-1}. Returns (indices, gaps, anchor position).
    The anchor (empirically best arm for modes 1 and 2, highest-UCB arm for
    mode 3) gets the mode-specific exploitation-friendly index; every other
    arm gets gap^2 / width_sq - log(width_sq). Arms with zero width never get
    picked: their index is +inf.
    """
    if mode not in LINIMED_MODES:
        raise UsageError(f"{mode} is not a LinIMED mode")
    K = len(means)
    if K == 0:
        raise UsageError("empty arm list")

    if mode is Mode.LINIMED3:
        anchor = int(np.argmax(ucbs))
        gaps = np.max(ucbs) - ucbs
    else:
        anchor = int(np.argmax(means))
        gaps = np.max(means) - means

    with np.errstate(divide="ignore", invalid="ignore"):
        log_w = np.log(widths_sq)
        indices = gaps * gaps / widths_sq - log_w

    if mode is Mode.LINIMED1:
        anchor_index = -log_w[anchor]
    elif mode is Mode.LINIMED2:
        anchor_index = min(math.log(horizon_T), -log_w[anchor])
    else:
        max_gap_sq = float(np.max(gaps * gaps))
        if max_gap_sq > 0.0:
            anchor_index = min(math.log(constant_C / max_gap_sq), -log_w[anchor])
        else:
            # limit of the cap as the largest gap vanishes: the cap never binds
            anchor_index = -log_w[anchor]
    indices[anchor] = anchor_index

    indices = np.where(widths_sq > 0.0, indices, np.inf)
    return indices, gaps, anchor


class BanditPolicy:
    """Common interface: ``select`` an arm id from an ArmSet, then ``observe``.

    ``select`` leaves the per-arm scores of the round in ``last_scores``.
    """

    label: str

    def __init__(self, dim: int, cfg: PolicyConfig, rng: np.random.Generator | None = None):
        self.dim = dim
        self.cfg = cfg
        self.rng = rng
        self.label = cfg.mode.value
        self.rounds = 0           # observations so far; time index t-1 at select time
        self.last_scores: ScoreTable | None = None
        self.last_position: int | None = None   # row of the chosen arm in the last ArmSet

    def select(self, arm_set) -> int:
        raise NotImplementedError

    def observe(self, x: np.ndarray, reward: float) -> None:
        raise NotImplementedError


class _RidgePolicy(BanditPolicy):
    """Base for the policies keeping one shared ridge state."""

    def __init__(self, dim, cfg, rng=None):
        super().__init__(dim, cfg, rng)
        self.state = ridge_init(dim, cfg.lam)

    def observe(self, x, reward):
        self.state.update(x, reward)
        self.rounds += 1

    def _round_scores(self, arm_set) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = arm_set.features
        if X.shape[0] == 0:
            raise UsageError("empty arm set")
        means = self.state.predict_many(X)
        b = beta(self.rounds, self.dim, self.cfg)
        widths_sq = (self.cfg.alpha_scale**2 * b) * self.state.mahalanobis_sq_many(X)
        ucbs = means + np.sqrt(widths_sq)
        return means, ucbs, widths_sq


class LinIMED(_RidgePolicy):
    """Deterministic index policy; pulls the arm with the minimum index."""

    def __init__(self, dim, cfg, rng=None):
        if cfg.mode not in LINIMED_MODES:
            raise ConfigurationError(f"LinIMED cannot run in mode {cfg.mode}")
        super().__init__(dim, cfg, rng)

    def select(self, arm_set) -> int:
        means, ucbs, widths_sq = self._round_scores(arm_set)
        indices, gaps, _ = linimed_indices(
            means,
            ucbs,
            widths_sq,
            self.cfg.mode,
            horizon_T=self.cfg.horizon_T,
            constant_C=self.cfg.constant_C,
        )
        pos = argmin_lowest_id(indices, arm_set.arm_ids)
        self.last_scores = ScoreTable(arm_set.arm_ids, means, ucbs, widths_sq, gaps, indices)
        self.last_position = pos
        return int(arm_set.arm_ids[pos])


class LinUCB(_RidgePolicy):
    """Optimistic baseline: argmax of mean + alpha*sqrt(beta)*||x||_{V^-1}."""

    def select(self, arm_set) -> int:
        means, ucbs, widths_sq = self._round_scores(arm_set)
        pos = argmax_lowest_id(ucbs, arm_set.arm_ids)
        gaps = np.max(means) - means
        # store -ucb so that argmin-of-index semantics match the other policies
        self.last_scores = ScoreTable(arm_set.arm_ids, means, ucbs, widths_sq, gaps, -ucbs)
        self.last_position = pos
        return int(arm_set.arm_ids[pos])


class LinTS(_RidgePolicy):
    """Posterior-style sampling from the confidence ellipsoid.

    Samples theta~ = theta_hat + alpha * sqrt(beta) * A z with A A^T = V^{-1}
    and z standard normal, then plays the argmax of <theta~, x>. With
    alpha_scale = 0 this degenerates to the greedy mean maximizer.
    """

    def __init__(self, dim, cfg, rng=None):
        super().__init__(dim, cfg, rng if rng is not None else np.random.default_rng())

    def select(self, arm_set) -> int:
        means, ucbs, widths_sq = self._round_scores(arm_set)
        b = beta(self.rounds, self.dim, self.cfg)
        z = self.rng.standard_normal(self.dim)
        theta_sample = self.state.estimate + self.cfg.alpha_scale * math.sqrt(b) * (
            self.state.sqrt_inv() @ z
        )
        scores = arm_set.features @ theta_sample
        pos = argmax_lowest_id(scores, arm_set.arm_ids)
        gaps = np.max(means) - means
        self.last_scores = ScoreTable(arm_set.arm_ids, means, ucbs, widths_sq, gaps, -scores)
        self.last_position = pos
        return int(arm_set.arm_ids[pos])


class UniformRandom(BanditPolicy):
    """Picks uniformly at random and never learns; replay control baseline."""

    def __init__(self, dim, cfg, rng=None):
        super().__init__(dim, cfg, rng if rng is not None else np.random.default_rng())

    def select(self, arm_set) -> int:
        K = len(arm_set.arm_ids)
        if K == 0:
            raise UsageError("empty arm set")
        pos = int(self.rng.integers(K))
        nan = np.full(K, np.nan)
        self.last_scores = ScoreTable(arm_set.arm_ids, nan, nan, nan, nan, nan)
        self.last_position = pos
        return int(arm_set.arm_ids[pos])

    def observe(self, x, reward):
        self.rounds += 1


class SupLinIMED(BanditPolicy):
    """Phase-layered variant for finite arm sets.

    Keeps ceil(ln T) levels, each with its own unit-regularized ridge state
    fed only by the rounds recorded at that level, so per-level estimates are
    independent of the arms they ranked. Each round walks the levels:

      Case 1  every width <= 1/sqrt(T): play the argmin of the IMED-style
              index (anchor capped at log(2T)); the observation is discarded.
      Case 2  every width <= 2^-s: keep the arms within 2^(1-s) of the best
              optimistic value and descend one level.
      Case 3  some width > 2^-s: play the lowest-id such arm and record the
              round at this level.
    """

    def __init__(self, dim, cfg, rng=None):
        super().__init__(dim, cfg, rng)
        self.num_levels = max(1, math.ceil(math.log(cfg.horizon_T)))
        self.levels = [ridge_init(dim, 1.0) for _ in range(self.num_levels)]
        self.psi_rounds: list[list[int]] = [[] for _ in range(self.num_levels)]
        self._pending: tuple[int, int] | None = None   # (case, level) awaiting observe
        self.last_case: int | None = None
        self.last_level: int | None = None
        self.last_iterations: int | None = None
        self.last_widths: np.ndarray | None = None

    def psi_sizes(self) -> list[int]:
        return [len(p) for p in self.psi_rounds]

    def select(self, arm_set) -> int:
        K = len(arm_set.arm_ids)
        if K == 0:
            raise UsageError("empty arm set")
        t = self.rounds + 1
        T = self.cfg.horizon_T
        gamma = 1.0 / (2.0 * t * t)
        alpha = math.sqrt(0.5 * math.log(2.0 * T * K / gamma))
        w_case1 = 1.0 / math.sqrt(T)

        active = np.arange(K)
        X = arm_set.features
        for s in range(1, self.num_levels + 1):
            state = self.levels[s - 1]
            feats = X[active]
            y_hat = state.predict_many(feats)
            widths = alpha * np.sqrt(state.mahalanobis_sq_many(feats))

            if np.all(widths <= w_case1):
                indices = self._case1_indices(y_hat, widths, T)
                pos = argmin_lowest_id(indices, arm_set.arm_ids[active])
                self._finish(case=1, level=s, iters=s, widths=widths)
                self._store_scores(arm_set, active, y_hat, widths, indices)
                self.last_position = int(active[pos])
                return int(arm_set.arm_ids[active[pos]])

            if np.all(widths <= 2.0**-s):
                opt = y_hat + widths
                keep = opt >= np.max(opt) - 2.0 ** (1 - s)
                active = active[keep]
                continue

            over = np.flatnonzero(widths > 2.0**-s)
            pos = over[np.argmin(arm_set.arm_ids[active[over]])]
            self._finish(case=3, level=s, iters=s, widths=widths)
            self._store_scores(arm_set, active, y_hat, widths, None)
            self.last_position = int(active[pos])
            return int(arm_set.arm_ids[active[pos]])

        # unreachable: at the last level 2^-s <= 1/sqrt(T), so Case 2 cannot fire there
        raise AssertionError("level loop exhausted without selecting an arm")

    def _case1_indices(self, y_hat: np.ndarray, widths: np.ndarray, T: int) -> np.ndarray:
        anchor = int(np.argmax(y_hat))
        gaps = np.max(y_hat) - y_hat
        w_sq = widths * widths
        with np.errstate(divide="ignore", invalid="ignore"):
            log_w = np.log(w_sq)
            indices = (gaps / widths) ** 2 - log_w
            indices[anchor] = min(math.log(2.0 * T), -log_w[anchor])
        return np.where(w_sq > 0.0, indices, np.inf)

    def _finish(self, case: int, level: int, iters: int, widths: np.ndarray) -> None:
        self._pending = (case, level)
        self.last_case = case
        self.last_level = level
        self.last_iterations = iters
        self.last_widths = widths

    def _store_scores(self, arm_set, active, y_hat, widths, indices) -> None:
        K = len(arm_set.arm_ids)
        means = np.full(K, np.nan)
        w_sq = np.full(K, np.nan)
        idx = np.full(K, np.nan)
        gaps = np.full(K, np.nan)
        means[active] = y_hat
        w_sq[active] = widths * widths
        gaps[active] = np.max(y_hat) - y_hat
        if indices is not None:
            idx[active] = indices
        self.last_scores = ScoreTable(
            arm_set.arm_ids, means, means + np.sqrt(w_sq), w_sq, gaps, idx
        )

    def observe(self, x, reward):
        if self._pending is None:
            raise UsageError("observe called before select")
        case, level = self._pending
        self._pending = None
        if case == 3:
            self.levels[level - 1].update(x, reward)
            self.psi_rounds[level - 1].append(self.rounds + 1)
        self.rounds += 1


_POLICY_CLASSES = {
    Mode.LINIMED1: LinIMED,
    Mode.LINIMED2: LinIMED,
    Mode.LINIMED3: LinIMED,
    Mode.LINUCB: LinUCB,
    Mode.LINTS: LinTS,
    Mode.SUPLINIMED: SupLinIMED,
    Mode.UNIFORM: UniformRandom,
}


def make_policy(dim: int, cfg: PolicyConfig, rng: np.random.Generator | None = None) -> BanditPolicy:
    return _POLICY_CLASSES[cfg.mode](dim, cfg, rng)
