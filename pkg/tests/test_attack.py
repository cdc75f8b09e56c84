import itertools

import numpy as np
import pytest

from specgame.attack import (
    AttackController,
    AttackPhase,
    AttackState,
    DensityEstimates,
    InducingTemplate,
    PhaseError,
    decide_launch,
    forecast_operating_point,
    mu_action,
    observe,
    step_phase,
)
from specgame.channel import ChannelParams, max_allowable_su_density
from specgame.game import DynamicsParams, GameEnv, PayoffParams
from specgame.geometry import Region, sample_world

CH = ChannelParams()
CAP = max_allowable_su_density(CH)


def baseline_env(kappa=0.0):
    return GameEnv(channel=CH, payoffs=PayoffParams(delta=10.0, nu=1.0, kappa=kappa))


def test_observe_empty_window():
    est = observe({}, 9e6)
    assert est == DensityEstimates(0.0, 0.0, 0.0)


def test_observe_count_over_area():
    est = observe({"pt": 90, "su": 9000, "mu": 1}, 9e6)
    assert est.lambda_pt == pytest.approx(1e-5)
    assert est.lambda_su == pytest.approx(1e-3)
    assert est.lambda_mu == pytest.approx(1.0 / 9e6)


def test_observe_zero_area_rejected():
    with pytest.raises(ValueError):
        observe({"pt": 1}, 0.0)


def test_observe_unbiased_over_sampled_worlds():
    region = Region(1500.0)
    rng = np.random.default_rng(3)
    estimates = []
    for _ in range(1000):
        world = sample_world(region, 1e-5, 1e-4, 0.0, 15.0, 10.0, rng=rng)
        estimates.append(observe({"pt": len(world.pts), "su": len(world.sus)}, region.area).lambda_pt)
    mean = np.mean(estimates)
    stderr = np.std(estimates) / np.sqrt(len(estimates))
    assert abs(mean - 1e-5) <= 2 * stderr + 1e-12


def test_initial_phase_transitions():
    state = AttackState()
    holding, ev = step_phase(state, 0.0, CAP, 5, launch=None)
    assert holding.phase is AttackPhase.INITIAL and ev is None

    inducing, ev = step_phase(state, 0.0, CAP, 5, launch=True, slot=3)
    assert inducing.phase is AttackPhase.INDUCING
    assert (ev.slot, ev.old_phase, ev.new_phase) == (3, AttackPhase.INITIAL, AttackPhase.INDUCING)

    aborted, ev = step_phase(state, 0.0, CAP, 5, launch=False)
    assert aborted.phase is AttackPhase.ABORTED and ev.new_phase is AttackPhase.ABORTED


def test_inducing_requires_consecutive_run():
    state, _ = step_phase(AttackState(), 0.0, CAP, 3, launch=True)
    high, low = CAP * 1.1, CAP * 0.5
    # two highs, a reset, then three highs
    for density, expected in ((high, AttackPhase.INDUCING), (high, AttackPhase.INDUCING),
                              (low, AttackPhase.INDUCING), (high, AttackPhase.INDUCING),
                              (high, AttackPhase.INDUCING), (high, AttackPhase.INACTIVE)):
        state, _ = step_phase(state, density, CAP, 3)
        assert state.phase is expected


def test_inducing_below_threshold_keeps_phase_and_counts_slots():
    state, _ = step_phase(AttackState(), 0.0, CAP, 5, launch=True)
    before = state.slots_in_phase
    state, ev = step_phase(state, CAP * 0.9, CAP, 5)
    assert state.phase is AttackPhase.INDUCING
    assert ev is None
    assert state.slots_in_phase == before + 1


def test_terminal_phases_reject_steps():
    inactive = AttackState(phase=AttackPhase.INACTIVE)
    aborted = AttackState(phase=AttackPhase.ABORTED)
    for state in (inactive, aborted):
        with pytest.raises(PhaseError):
            step_phase(state, 0.0, CAP, 5)


def test_phase_graph_exhaustive_small_sequences():
    # enumerate every launch decision and density pattern up to length 6 and
    # confirm only the allowed transitions ever occur
    allowed = {
        (AttackPhase.INITIAL, AttackPhase.INITIAL),
        (AttackPhase.INITIAL, AttackPhase.INDUCING),
        (AttackPhase.INITIAL, AttackPhase.ABORTED),
        (AttackPhase.INDUCING, AttackPhase.INDUCING),
        (AttackPhase.INDUCING, AttackPhase.INACTIVE),
    }
    high, low = CAP * 2.0, CAP * 0.5
    for launch in (None, True, False):
        for pattern in itertools.product((high, low), repeat=6):
            state = AttackState()
            for i, density in enumerate(pattern):
                if state.phase in (AttackPhase.INACTIVE, AttackPhase.ABORTED):
                    break
                old = state.phase
                state, _ = step_phase(state, density, CAP, 2,
                                      launch=launch if old is AttackPhase.INITIAL else None, slot=i)
                assert (old, state.phase) in allowed


def test_mu_action_silent_phases():
    rng = np.random.default_rng(0)
    for phase in (AttackPhase.INITIAL, AttackPhase.INACTIVE, AttackPhase.ABORTED):
        state = AttackState(phase=phase, mu_access_prob=1.0)
        assert not any(mu_action(state, rng) for _ in range(100))


def test_mu_action_inducing_rates():
    always = AttackState(phase=AttackPhase.INDUCING, mu_access_prob=1.0)
    assert all(mu_action(always, np.random.default_rng(1)) for _ in range(100))
    half = AttackState(phase=AttackPhase.INDUCING, mu_access_prob=0.5)
    rng = np.random.default_rng(2)
    rate = np.mean([mu_action(half, rng) for _ in range(10_000)])
    assert abs(rate - 0.5) <= 0.01


def test_controller_emits_template_density_while_inducing():
    template = InducingTemplate(mu_access_prob=0.5, hysteresis=5, inducement=1.0)
    ctl = AttackController(1e-7, template, CAP, launch=True, lambda_su=1e-3)
    drive = ctl(0, 0.0)
    assert ctl.phase is AttackPhase.INDUCING
    assert drive.active_density == pytest.approx(1e-7 * 0.5, rel=1e-15)
    assert drive.inducement == 1.0


def test_controller_withdraws_and_goes_silent():
    template = InducingTemplate(hysteresis=2)
    ctl = AttackController(1e-7, template, CAP, launch=True, lambda_su=1e-3)
    ctl(0, 0.0)
    ctl(1, CAP * 2)
    drive = ctl(2, CAP * 2)
    assert ctl.phase is AttackPhase.INACTIVE
    assert drive.active_density == 0.0 and drive.inducement == 0.0
    assert [(e.old_phase, e.new_phase) for e in ctl.events] == [
        (AttackPhase.INITIAL, AttackPhase.INDUCING),
        (AttackPhase.INDUCING, AttackPhase.INACTIVE),
    ]


def test_controller_mimic_behavior_after_withdrawal():
    template = InducingTemplate(hysteresis=1)
    ctl = AttackController(1e-6, template, CAP, launch=True,
                           inactive_behavior="mimic-su", lambda_su=1e-3)
    ctl(0, 0.0)
    drive = ctl(1, CAP * 2)
    assert ctl.phase is AttackPhase.INACTIVE
    observed = 4e-4
    drive = ctl(2, observed)
    assert drive.active_density == pytest.approx(1e-6 * observed / 1e-3, rel=1e-12)
    assert drive.inducement == 0.0


def test_decide_launch_baseline_payoffs():
    dynamics = DynamicsParams(steps=400)
    template = InducingTemplate()
    est = DensityEstimates(1e-5, 1e-3, 1e-7)
    assert decide_launch(est, baseline_env(kappa=0.0), template, dynamics, CAP) is True
    assert decide_launch(est, baseline_env(kappa=8.0), template, dynamics, CAP) is False


def test_decide_launch_kappa8_forecast_still_rises_first():
    est = DensityEstimates(1e-5, 1e-3, 1e-7)
    forecast = forecast_operating_point(est, baseline_env(kappa=8.0), InducingTemplate(),
                                        DynamicsParams(steps=400), CAP)
    assert forecast.label == "robust"
    assert forecast.peak_mutant_share > 0.01


def test_decide_launch_nobody_to_induce():
    est = DensityEstimates(1e-5, 0.0, 1e-7)
    assert decide_launch(est, baseline_env(kappa=0.0), InducingTemplate(), DynamicsParams(steps=100), CAP) is False


def test_decide_launch_replay_identical():
    est = DensityEstimates(1e-5, 1e-3, 1e-7)
    args = (est, baseline_env(kappa=0.0), InducingTemplate(), DynamicsParams(steps=200), CAP)
    assert decide_launch(*args) == decide_launch(*args) == decide_launch(*args)
