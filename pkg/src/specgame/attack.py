"""Malicious-user controller: estimate the environment, decide whether an
inducement attack pays off, jam-and-advertise while inducing, and withdraw
once the induced population is dense enough to keep the damage self-sustaining.

Attackers collude perfectly, so one controller drives all of them. While
inducing they run slotted-Aloha jamming at a configurable access probability
and make themselves perceived by secondary users; once the observed active
secondary density has exceeded the admissible cap for a run of consecutive
observations, they deactivate (or optionally blend in as ordinary secondary
users) to save power and hide.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from .game import (
    Classification,
    DynamicsParams,
    GameEnv,
    MuDrive,
    classify_operating_point,
)


class AttackPhase(Enum):
    INITIAL = "initial"
    INDUCING = "inducing"
    INACTIVE = "inactive"
    ABORTED = "aborted"


TERMINAL_PHASES = (AttackPhase.INACTIVE, AttackPhase.ABORTED)


class PhaseError(RuntimeError):
    """Raised on an illegal phase transition request."""


@dataclass(frozen=True)
class DensityEstimates:
    """Per-class density estimates (nodes/m^2) gathered during observation."""

    lambda_pt: float = 0.0
    lambda_su: float = 0.0
    lambda_mu: float = 0.0


def observe(counts, area: float) -> DensityEstimates:
    """Unbiased density estimates from class counts over an observation window:
    lambda_hat = count / area. `counts` maps class names ('pt', 'su', 'mu') to counts."""
    if not area > 0:
        raise ValueError("observation window area must be positive")
    return DensityEstimates(
        lambda_pt=counts.get("pt", 0) / area,
        lambda_su=counts.get("su", 0) / area,
        lambda_mu=counts.get("mu", 0) / area,
    )


@dataclass(frozen=True)
class InducingTemplate:
    """Knobs of the inducing phase: Aloha access probability, withdrawal
    hysteresis (consecutive above-cap observations), and the perception
    saturation the jamming advertises to secondary users."""

    mu_access_prob: float = 0.5
    hysteresis: int = 5
    inducement: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu_access_prob <= 1.0:
            raise ValueError("mu_access_prob must lie in [0, 1]")
        if self.hysteresis < 1:
            raise ValueError("hysteresis must be at least 1")
        if not 0.0 <= self.inducement <= 1.0:
            raise ValueError("inducement must lie in [0, 1]")


@dataclass(frozen=True)
class AttackState:
    """Controller state: phase, gathered estimates, and withdrawal bookkeeping."""

    phase: AttackPhase = AttackPhase.INITIAL
    estimates: DensityEstimates = DensityEstimates()
    observed_mutant_density: float = 0.0
    mu_access_prob: float = 0.5
    slots_in_phase: int = 0
    above_cap_run: int = 0


@dataclass(frozen=True)
class PhaseEvent:
    slot: int
    old_phase: AttackPhase
    new_phase: AttackPhase
    trigger: float


def step_phase(
    state: AttackState,
    observed_mutant_density: float,
    density_cap: float,
    hysteresis: int,
    launch: Optional[bool] = None,
    slot: int = 0,
) -> Tuple[AttackState, Optional[PhaseEvent]]:
    """Advance the phase machine by one observation.

    INITIAL leaves only via a launch decision (True -> INDUCING, False ->
    ABORTED, None -> keep observing). INDUCING moves to INACTIVE after
    `hysteresis` consecutive observations above the density cap. Terminal
    phases reject further steps.
    """
    if state.phase in TERMINAL_PHASES:
        raise PhaseError(f"cannot step terminal phase {state.phase.value}")
    if state.phase is AttackPhase.INITIAL:
        if launch is None:
            return replace(state, observed_mutant_density=observed_mutant_density,
                           slots_in_phase=state.slots_in_phase + 1), None
        new_phase = AttackPhase.INDUCING if launch else AttackPhase.ABORTED
        event = PhaseEvent(slot, state.phase, new_phase, observed_mutant_density)
        return replace(state, phase=new_phase, observed_mutant_density=observed_mutant_density,
                       slots_in_phase=0, above_cap_run=0), event
    # INDUCING
    run = state.above_cap_run + 1 if observed_mutant_density > density_cap else 0
    if run >= hysteresis:
        event = PhaseEvent(slot, state.phase, AttackPhase.INACTIVE, observed_mutant_density)
        return replace(state, phase=AttackPhase.INACTIVE, observed_mutant_density=observed_mutant_density,
                       slots_in_phase=0, above_cap_run=run), event
    return replace(state, observed_mutant_density=observed_mutant_density,
                   slots_in_phase=state.slots_in_phase + 1, above_cap_run=run), None


def mu_action(state: AttackState, rng: np.random.Generator) -> bool:
    """Whether one attacker transmits this slot: Aloha(mu_access_prob) while
    inducing, silent in every other phase."""
    if state.phase is AttackPhase.INDUCING:
        return bool(rng.random() < state.mu_access_prob)
    return False


class AttackController:
    """Stateful schedule driving the game: call with (step, observed active
    secondary density) to get the MuDrive for that step.

    The launch decision may be resolved at construction (mean-field oracle) or
    later via resolve_launch once estimates exist (Monte Carlo observation).
    Phase transitions are logged to `events`; `phase_history` records the
    phase in force at each step.
    """

    def __init__(
        self,
        lambda_mu: float,
        template: InducingTemplate,
        density_cap: float,
        launch: Optional[bool] = None,
        inactive_behavior: str = "silent",
        lambda_su: float = 0.0,
    ) -> None:
        if inactive_behavior not in ("silent", "mimic-su"):
            raise ValueError("inactive_behavior must be 'silent' or 'mimic-su'")
        self.lambda_mu = lambda_mu
        self.template = template
        self.density_cap = density_cap
        self.inactive_behavior = inactive_behavior
        self.lambda_su = lambda_su
        self.state = AttackState(mu_access_prob=template.mu_access_prob)
        self._launch = launch
        self.events: List[PhaseEvent] = []
        self.phase_history: List[AttackPhase] = []

    @property
    def phase(self) -> AttackPhase:
        return self.state.phase

    def resolve_launch(self, launch: bool) -> None:
        self._launch = launch

    def _drive(self, observed: float) -> MuDrive:
        if self.state.phase is AttackPhase.INDUCING:
            return MuDrive(self.lambda_mu * self.template.mu_access_prob, self.template.inducement)
        if self.state.phase is AttackPhase.INACTIVE and self.inactive_behavior == "mimic-su":
            # blend in: adopt the population's transmit-weighted access rate
            rate = observed / self.lambda_su if self.lambda_su > 0 else 0.0
            return MuDrive(self.lambda_mu * rate, 0.0)
        return MuDrive(0.0, 0.0)

    def __call__(self, t: int, observed_active_su_density: float) -> MuDrive:
        if self.state.phase not in TERMINAL_PHASES:
            self.state, event = step_phase(
                self.state,
                observed_active_su_density,
                self.density_cap,
                self.template.hysteresis,
                launch=self._launch if self.state.phase is AttackPhase.INITIAL else None,
                slot=t,
            )
            if event is not None:
                self.events.append(event)
        self.phase_history.append(self.state.phase)
        return self._drive(observed_active_su_density)


def make_template_schedule(
    lambda_mu: float,
    template: InducingTemplate,
    density_cap: float,
    inactive_behavior: str = "silent",
    lambda_su: float = 0.0,
) -> Callable[[], AttackController]:
    """Factory of fresh always-launching controllers: the standard inducing
    template used by forecasts and region sweeps."""

    def factory() -> AttackController:
        return AttackController(lambda_mu, template, density_cap, launch=True,
                                inactive_behavior=inactive_behavior, lambda_su=lambda_su)

    return factory


def forecast_operating_point(
    estimates: DensityEstimates,
    env_template: GameEnv,
    template: InducingTemplate,
    dynamics: DynamicsParams,
    density_cap: float,
) -> Classification:
    """Mean-field forecast of the attack outcome from the attacker's estimates."""
    env = replace(env_template, lambda_su=estimates.lambda_su, lambda_pt=estimates.lambda_pt)
    factory = make_template_schedule(estimates.lambda_mu, template, density_cap, lambda_su=estimates.lambda_su)
    return classify_operating_point(env, factory, dynamics, density_cap=density_cap)


def decide_launch(
    estimates: DensityEstimates,
    env_template: GameEnv,
    template: InducingTemplate,
    dynamics: DynamicsParams,
    density_cap: float,
) -> bool:
    """Launch iff the mean-field forecast under the inducing template ends fragile.

    Pure in its inputs; with nobody to induce the answer is immediately no.
    """
    if estimates.lambda_su <= 0:
        return False
    return forecast_operating_point(estimates, env_template, template, dynamics, density_cap).label == "fragile"
