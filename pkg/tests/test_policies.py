from __future__ import annotations

import math

import numpy as np
import pytest

from linbandit.envs import ArmSet
from linbandit.errors import ConfigurationError, UsageError
from linbandit.policies import (
    GammaSchedule,
    LinIMED,
    LinTS,
    LinUCB,
    Mode,
    PolicyConfig,
    argmin_lowest_id,
    beta,
    linimed_indices,
    make_policy,
)

SQRT2 = math.sqrt(2.0)


def synth_cfg(mode=Mode.LINIMED1, alpha=1.0, T=1000):
    return PolicyConfig(
        mode=mode,
        lam=2.0,
        bound_S=1.0,
        bound_L=SQRT2,
        noise_R=0.1,
        gamma_schedule=GammaSchedule.inverse_one_plus_t_squared(),
        alpha_scale=alpha,
        constant_C=30.0,
        horizon_T=T,
    )


def arm_set(features, t=1):
    features = np.asarray(features, dtype=np.float64)
    return ArmSet(round=t, features=features, arm_ids=np.arange(len(features)))


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_config_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        PolicyConfig(mode=Mode.LINUCB, lam=0.0)
    with pytest.raises(ConfigurationError):
        PolicyConfig(mode=Mode.LINUCB, constant_C=0.5)
    with pytest.raises(ConfigurationError):
        PolicyConfig(mode=Mode.LINUCB, alpha_scale=-0.1)
    with pytest.raises(ConfigurationError):
        GammaSchedule.constant(0.0)


# ---------------------------------------------------------------------------
# confidence radius
# ---------------------------------------------------------------------------

def test_beta_at_time_zero_is_lam_s_squared():
    # gamma(0) = 1 makes the log vanish: beta = (sqrt(lam) S)^2
    cfg = synth_cfg()
    assert beta(0, 2, cfg) == pytest.approx(2.0, abs=1e-12)


def test_beta_matches_varying_arm_closed_form():
    cfg = synth_cfg()
    for t in range(0, 1200, 7):
        closed = (0.1 * math.sqrt(6.0 * math.log(1 + t)) + SQRT2) ** 2
        assert beta(t, 2, cfg) == pytest.approx(closed, abs=1e-12)


def test_beta_matches_replay_closed_form():
    cfg = PolicyConfig(
        mode=Mode.LINUCB,
        lam=20.0,
        bound_S=1.0,
        bound_L=math.sqrt(20.0),
        noise_R=0.1,
        gamma_schedule=GammaSchedule.inverse_t_squared(),
        horizon_T=1000,
    )
    for t in range(1, 800, 13):
        closed = (0.1 * math.sqrt(25.0 * math.log((1 + t) * t * t)) + math.sqrt(20.0)) ** 2
        assert beta(t, 25, cfg) == pytest.approx(closed, abs=1e-12)


def test_beta_nondecreasing_for_builtin_schedules():
    for sched in (GammaSchedule.inverse_t_squared(), GammaSchedule.inverse_one_plus_t_squared()):
        cfg = PolicyConfig(mode=Mode.LINUCB, gamma_schedule=sched)
        vals = [beta(t, 3, cfg) for t in range(0, 500)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_beta_rejects_negative_time():
    with pytest.raises(UsageError):
        beta(-1, 2, synth_cfg())


# ---------------------------------------------------------------------------
# index computation
# ---------------------------------------------------------------------------

def test_two_arm_mode1_example():
    means = np.array([1.0, 0.5])
    widths = np.array([1.0, 1.0])
    ucbs = means + np.sqrt(widths)
    indices, gaps, anchor = linimed_indices(
        means, ucbs, widths, Mode.LINIMED1, horizon_T=1000, constant_C=30.0
    )
    assert anchor == 0
    assert indices[0] == pytest.approx(0.0)          # -log(1)
    assert indices[1] == pytest.approx(0.25)         # 0.5^2/1 - log 1
    assert gaps[1] == pytest.approx(0.5)
    assert argmin_lowest_id(indices, np.arange(2)) == 0


def test_two_arm_mode2_example():
    means = np.array([1.0, 0.5])
    widths = np.array([1.0, 1.0])
    indices, _, anchor = linimed_indices(
        means, means + 1.0, widths, Mode.LINIMED2, horizon_T=10, constant_C=30.0
    )
    # log 10 > 0 so the cap does not bind
    assert indices[anchor] == pytest.approx(0.0)


def test_mode3_example():
    ucbs = np.array([2.0, 1.0])
    widths = np.array([0.25, 0.25])
    means = ucbs - np.sqrt(widths)
    indices, gaps, anchor = linimed_indices(
        means, ucbs, widths, Mode.LINIMED3, horizon_T=1000, constant_C=30.0
    )
    assert anchor == 0
    assert gaps[1] == pytest.approx(1.0)
    assert indices[0] == pytest.approx(1.3862943611198906)
    assert indices[1] == pytest.approx(5.386294361119891)


def test_mode2_anchor_capped_at_log_T():
    rng = np.random.default_rng(0)
    for _ in range(200):
        K = int(rng.integers(2, 8))
        means = rng.normal(0, 1, K)
        widths = rng.uniform(1e-6, 4.0, K)
        indices, _, anchor = linimed_indices(
            means, means + np.sqrt(widths), widths, Mode.LINIMED2, horizon_T=500, constant_C=30.0
        )
        assert indices[anchor] <= math.log(500) + 1e-12


def test_mode3_anchor_capped_by_gap_term():
    rng = np.random.default_rng(1)
    for _ in range(200):
        K = int(rng.integers(2, 8))
        widths = rng.uniform(1e-6, 4.0, K)
        ucbs = rng.normal(0, 1, K)
        means = ucbs - np.sqrt(widths)
        indices, gaps, anchor = linimed_indices(
            means, ucbs, widths, Mode.LINIMED3, horizon_T=500, constant_C=30.0
        )
        max_gap_sq = float(np.max(gaps**2))
        if max_gap_sq > 0:
            assert indices[anchor] <= math.log(30.0 / max_gap_sq) + 1e-12


def test_mode3_zero_gap_falls_back_to_log_width():
    means = np.array([0.5, 0.5])
    widths = np.array([0.25, 0.25])
    ucbs = means + np.sqrt(widths)
    indices, _, anchor = linimed_indices(
        means, ucbs, widths, Mode.LINIMED3, horizon_T=1000, constant_C=30.0
    )
    assert indices[anchor] == pytest.approx(-math.log(0.25))


def test_non_anchor_index_dominates_log_width():
    rng = np.random.default_rng(2)
    for mode in (Mode.LINIMED1, Mode.LINIMED2, Mode.LINIMED3):
        K = 6
        means = rng.normal(0, 1, K)
        widths = rng.uniform(1e-6, 4.0, K)
        ucbs = means + np.sqrt(widths)
        indices, _, anchor = linimed_indices(
            means, ucbs, widths, mode, horizon_T=1000, constant_C=30.0
        )
        for a in range(K):
            if a != anchor:
                assert indices[a] >= -math.log(widths[a]) - 1e-12


def test_zero_width_arm_never_selected():
    means = np.array([1.0, 0.2])
    widths = np.array([0.0, 0.5])
    ucbs = means + np.sqrt(widths)
    indices, _, _ = linimed_indices(
        means, ucbs, widths, Mode.LINIMED1, horizon_T=1000, constant_C=30.0
    )
    assert math.isinf(indices[0])
    assert argmin_lowest_id(indices, np.arange(2)) == 1


def test_empty_arm_list_rejected():
    with pytest.raises(UsageError):
        linimed_indices(np.array([]), np.array([]), np.array([]), Mode.LINIMED1,
                        horizon_T=10, constant_C=30.0)


def test_selection_scale_invariant():
    rng = np.random.default_rng(3)
    for _ in range(100):
        K = int(rng.integers(2, 9))
        vals = rng.normal(0, 5, K)
        vals[rng.integers(K)] = vals[0]       # force occasional ties
        ids = np.arange(K)
        c = float(rng.uniform(0.1, 10.0))
        assert argmin_lowest_id(vals, ids) == argmin_lowest_id(c * vals, ids)


# ---------------------------------------------------------------------------
# selection behavior
# ---------------------------------------------------------------------------

def test_fresh_state_symmetric_tie_goes_to_arm_zero():
    feats = np.array([[1.0, 0.0], [0.0, 1.0], [SQRT2 / 2, SQRT2 / 2]])
    pol = LinIMED(2, synth_cfg(Mode.LINIMED1))
    assert pol.select(arm_set(feats)) == 0
    tab = pol.last_scores
    assert np.allclose(tab.indices, tab.indices[0])


def test_shared_context_deterministic_arm_zero():
    feats = np.tile(np.array([[0.6, 0.3]]), (4, 1))
    for mode in (Mode.LINIMED1, Mode.LINIMED2, Mode.LINIMED3):
        pol = LinIMED(2, synth_cfg(mode))
        pol.observe(np.array([0.5, 0.1]), 0.7)
        assert pol.select(arm_set(feats)) == 0


def test_linimed_two_arm_selection():
    # plant an estimate so the means reproduce the (1.0, 0.5) example; the
    # fresh V = 2I with beta(0) = 2 gives both arms width_sq exactly 1
    pol = LinIMED(2, synth_cfg(Mode.LINIMED1))
    pol.state.estimate = np.array([1.0, 0.5])
    feats = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert pol.select(arm_set(feats)) == 0
    assert pol.last_scores.widths_sq == pytest.approx([1.0, 1.0])
    assert pol.last_scores.indices == pytest.approx([0.0, 0.25])


def test_linucb_dominating_arm():
    pol = LinUCB(2, synth_cfg(Mode.LINUCB, alpha=0.5))
    pol.state.estimate = np.array([1.0, 0.5])
    feats = np.array([[1.0, 0.0], [0.0, 1.0]])
    # equal widths by symmetry of V = lam*I, so the higher mean wins
    assert pol.select(arm_set(feats)) == 0


def test_observe_updates_estimate():
    pol = LinIMED(2, synth_cfg(Mode.LINIMED1))
    pol.observe(np.array([1.0, 0.0]), 1.0)
    # with lam=2: estimate = (2I + e1 e1^T)^{-1} e1 = e1/3
    assert pol.state.predict(np.array([1.0, 0.0])) == pytest.approx(1.0 / 3.0)
    assert pol.rounds == 1


def test_observe_zero_context_keeps_estimate():
    pol = LinIMED(2, synth_cfg(Mode.LINIMED1))
    pol.observe(np.zeros(2), 3.0)
    assert np.allclose(pol.state.estimate, 0.0)


def test_lints_zero_alpha_is_greedy():
    rng = np.random.default_rng(11)
    pol = LinTS(2, synth_cfg(Mode.LINTS, alpha=0.0), rng)
    pol.state.estimate = np.array([0.9, -0.2])
    feats = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    for _ in range(10):
        assert pol.select(arm_set(feats)) == 0


def test_lints_consumes_rng_deterministically():
    feats = np.array([[1.0, 0.0], [0.0, 1.0]])
    picks1 = []
    pol = LinTS(2, synth_cfg(Mode.LINTS, alpha=1.0), np.random.default_rng(7))
    for _ in range(20):
        picks1.append(pol.select(arm_set(feats)))
    pol2 = LinTS(2, synth_cfg(Mode.LINTS, alpha=1.0), np.random.default_rng(7))
    picks2 = [pol2.select(arm_set(feats)) for _ in range(20)]
    assert picks1 == picks2


def test_make_policy_dispatch():
    for mode in Mode:
        pol = make_policy(3, PolicyConfig(mode=mode), np.random.default_rng(0))
        assert pol.label == mode.value


def test_select_empty_arm_set_rejected():
    pol = LinIMED(2, synth_cfg())
    empty = ArmSet(round=1, features=np.zeros((0, 2)), arm_ids=np.arange(0))
    with pytest.raises(UsageError):
        pol.select(empty)
