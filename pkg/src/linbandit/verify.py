"""Independent oracles and statistical validators.

Each check recomputes a quantity the library maintains incrementally (or a
bound its behavior must respect) by a separate route: dense inversion for
the ridge inverse, a literal per-arm transcription for the selection
indices, closed-form estimators for the confidence-ellipsoid coverage, and
the elliptical potential count bound on chosen-context trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import ridge_init
from .policies import Mode

POTENTIAL_M_GRID = (0.01, 0.1, 0.5, 1.0, 2.0)


# ---------------------------------------------------------------------------
# Incremental inverse vs dense recomputation
# ---------------------------------------------------------------------------

def check_inverse(trace: list[tuple[np.ndarray, float]], dim: int, lam: float) -> float:
    """Replay a sequence of (x, y) updates and return the worst deviation.

    Compares the incrementally maintained inverse, estimate and quadratic
    form against dense recomputation (np.linalg.inv / solve) after every
    update.
    """
    state = ridge_init(dim, lam)
    gram = lam * np.eye(dim)
    moment = np.zeros(dim)
    worst = 0.0
    for x, y in trace:
        x = np.asarray(x, dtype=np.float64)
        state.update(x, y)
        gram += np.outer(x, x)
        moment += y * x
        inv = np.linalg.inv(gram)
        est = np.linalg.solve(gram, moment)
        worst = max(
            worst,
            float(np.max(np.abs(state.gram_inv - inv))),
            float(np.max(np.abs(state.estimate - est))),
            abs(state.mahalanobis_sq(x) - float(x @ inv @ x)),
        )
    return worst


# ---------------------------------------------------------------------------
# Confidence-ellipsoid coverage
# ---------------------------------------------------------------------------

@dataclass
class CoverageReport:
    trials: int
    checks: int                  # trials * rounds actually tested
    violations: int              # round-checks where the ellipsoid missed theta*
    gamma_nominal: float
    rate: float
    mc_stderr: float

    @property
    def threshold(self) -> float:
        return self.gamma_nominal + 3.0 * self.mc_stderr

    @property
    def passed(self) -> bool:
        return self.rate <= self.threshold


def check_coverage(
    d: int,
    T: int,
    gamma: float,
    trials: int,
    *,
    lam: float = 1.0,
    bound_S: float = 1.0,
    noise_R: float = 0.1,
    data_noise_R: float | None = None,
    seed: int = 0,
) -> CoverageReport:
    """Empirical coverage of the confidence ellipsoid under a fixed schedule.

    Plays the scaled coordinate vectors round-robin (a non-adaptive rule, so
    feedback cannot inflate the miss rate) with a fresh unit-norm hidden
    parameter per trial, and counts the rounds whose ellipsoid of squared
    radius (R sqrt(d log((1+(t-1)/lam)/gamma)) + sqrt(lam) S)^2 misses it.
    The coordinate schedule keeps the Gram matrix diagonal, so the estimator
    is recomputed in closed form rather than through the library.

    The standard error is taken at trial granularity (rounds within a trial
    are dependent), which is the conservative choice.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    rng = np.random.default_rng(seed)
    if data_noise_R is None:
        data_noise_R = noise_R

    violations = 0
    for _ in range(trials):
        direction = rng.standard_normal(d)
        theta = bound_S * direction / np.linalg.norm(direction)
        arm_idx = np.arange(T) % d
        noise = data_noise_R * rng.standard_normal(T)
        rewards = theta[arm_idx] + noise

        counts = np.zeros(d)
        sums = np.zeros(d)
        for t in range(1, T + 1):
            # V_{t-1} is diagonal: lam + pulls per coordinate
            diag = lam + counts
            est = sums / diag
            dist_sq = float(((est - theta) ** 2 * diag).sum())
            log_arg = (1.0 + (t - 1) / lam) / gamma
            radius = noise_R * math.sqrt(d * math.log(log_arg)) + math.sqrt(lam) * bound_S
            if dist_sq > radius * radius:
                violations += 1
            j = arm_idx[t - 1]
            counts[j] += 1.0
            sums[j] += rewards[t - 1]

    checks = trials * T
    rate = violations / checks
    stderr = math.sqrt(gamma * (1.0 - gamma) / trials) if gamma < 1.0 else 0.0
    return CoverageReport(
        trials=trials,
        checks=checks,
        violations=violations,
        gamma_nominal=gamma,
        rate=rate,
        mc_stderr=stderr,
    )


# ---------------------------------------------------------------------------
# Elliptical potential count
# ---------------------------------------------------------------------------

@dataclass
class PotentialReport:
    m: float
    observed_count: int
    bound: float

    @property
    def holds(self) -> bool:
        return self.observed_count <= self.bound


def check_potential(
    contexts: np.ndarray,
    lam: float,
    bound_L: float,
    m_grid: tuple[float, ...] = POTENTIAL_M_GRID,
) -> list[PotentialReport]:
    """Count bound on rounds with large ||x_t||^2 in the pre-update inverse.

    For every m in (0, 2] the number of rounds with x^T V_{t-1}^{-1} x >= m
    must stay below (6 d / m) * log(1 + 2 L^2 / (lam m)).
    """
    contexts = np.asarray(contexts, dtype=np.float64)
    T, d = contexts.shape
    msq = np.empty(T)
    state = ridge_init(d, lam)
    for t in range(T):
        msq[t] = state.mahalanobis_sq(contexts[t])
        state.update(contexts[t], 0.0)
    reports = []
    for m in m_grid:
        if not 0.0 < m <= 2.0:
            raise ValueError(f"m must be in (0, 2], got {m}")
        count = int(np.sum(msq >= m))
        bound = (6.0 * d / m) * math.log(1.0 + 2.0 * bound_L**2 / (lam * m))
        reports.append(PotentialReport(m=m, observed_count=count, bound=bound))
    return reports


# ---------------------------------------------------------------------------
# Index differential oracle
# ---------------------------------------------------------------------------

def reference_indices(
    means: list[float],
    ucbs: list[float],
    widths_sq: list[float],
    mode: Mode,
    horizon_T: int,
    constant_C: float,
) -> tuple[list[float], int]:
    """Literal per-arm transcription of the three index definitions.

    Deliberately written as a scalar loop with no code shared with the
    policies module, to serve as a differential-testing oracle.
    """
    K = len(means)
    if mode is Mode.LINIMED3:
        best_val = max(ucbs)
        anchor = ucbs.index(best_val)
        gaps = [best_val - u for u in ucbs]
    else:
        best_val = max(means)
        anchor = means.index(best_val)
        gaps = [best_val - m for m in means]

    indices: list[float] = []
    for a in range(K):
        w = widths_sq[a]
        if w <= 0.0:
            indices.append(math.inf)
            continue
        if a == anchor:
            if mode is Mode.LINIMED1:
                val = -math.log(w)
            elif mode is Mode.LINIMED2:
                val = min(math.log(horizon_T), -math.log(w))
            else:
                max_gap_sq = max(g * g for g in gaps)
                if max_gap_sq > 0.0:
                    val = min(math.log(constant_C / max_gap_sq), -math.log(w))
                else:
                    val = -math.log(w)
        else:
            val = gaps[a] * gaps[a] / w - math.log(w)
        indices.append(val)

    selected = 0
    for a in range(1, K):
        if indices[a] < indices[selected]:
            selected = a
    return indices, selected


def check_index_oracle(
    means: np.ndarray,
    ucbs: np.ndarray,
    widths_sq: np.ndarray,
    mode: Mode,
    horizon_T: int = 1000,
    constant_C: float = 30.0,
    tol: float = 1e-12,
) -> bool:
    """Compare the policies' vectorized indices against the scalar oracle."""
    from .policies import argmin_lowest_id, linimed_indices

    indices, _, _ = linimed_indices(
        np.asarray(means, dtype=np.float64),
        np.asarray(ucbs, dtype=np.float64),
        np.asarray(widths_sq, dtype=np.float64),
        mode,
        horizon_T=horizon_T,
        constant_C=constant_C,
    )
    ref, ref_sel = reference_indices(
        list(map(float, means)),
        list(map(float, ucbs)),
        list(map(float, widths_sq)),
        mode,
        horizon_T,
        constant_C,
    )
    sel = argmin_lowest_id(indices, np.arange(len(means)))
    if sel != ref_sel:
        return False
    for a, b in zip(indices, ref):
        if math.isinf(a) and math.isinf(b):
            continue
        if not math.isclose(a, b, rel_tol=tol, abs_tol=tol):
            return False
    return True
