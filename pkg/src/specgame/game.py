"""Evolutionary access game over secondary-user strategies.

Each strategy is an access probability. A silent user collects the compliance
reward kappa; a transmitting user is paid only when it perceives at least one
other active non-primary transmitter (otherwise transgression pays zero), and
then earns delta on a successful transmission or loses nu on a failed one.
Success probabilities come from the closed-form Poisson-field channel model;
population shares evolve under discrete-step replicator dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .channel import ChannelParams, InterfererField, max_allowable_su_density, median_sinr, success_prob

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class StrategySet:
    """Strictly increasing access probabilities, at least two of them."""

    access_probs: Tuple[float, ...] = (0.0, 1.0)

    def __post_init__(self) -> None:
        p = tuple(float(v) for v in self.access_probs)
        object.__setattr__(self, "access_probs", p)
        if len(p) < 2:
            raise ValueError("strategy set needs at least two access probabilities")
        if any(not 0.0 <= v <= 1.0 for v in p):
            raise ValueError("access probabilities must lie in [0, 1]")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("access probabilities must be strictly increasing")

    def __len__(self) -> int:
        return len(self.access_probs)

    @property
    def probs(self) -> np.ndarray:
        return np.asarray(self.access_probs)


@dataclass(frozen=True)
class PayoffParams:
    """Incentive triple: delta rewards success, nu prices failure, kappa pays compliance."""

    delta: float = 10.0
    nu: float = 1.0
    kappa: float = 0.0

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")


@dataclass(frozen=True)
class MuDrive:
    """Malicious-user pressure on the game at one step.

    active_density: transmitting MUs per m^2 (enters interference and
    proximity perception). inducement: probability that a secondary user
    perceives an advertised accomplice regardless of local density -- the
    mechanism by which sparse attackers open the transgression payoff gate.
    """

    active_density: float = 0.0
    inducement: float = 0.0


IDLE_MU = MuDrive(0.0, 0.0)

# (step index, currently observed active SU density) -> MuDrive
MuSchedule = Callable[[int, float], MuDrive]


@dataclass(frozen=True)
class GameEnv:
    """Everything the mean-field payoff needs: channel, densities, sensing, incentives."""

    channel: ChannelParams
    payoffs: PayoffParams
    strategies: StrategySet = StrategySet()
    lambda_su: float = 1e-3
    lambda_pt: float = 1e-5
    sensing_radius: float = 50.0
    mu: MuDrive = IDLE_MU
    include_pt_at_su: bool = True
    include_pt_at_pr: bool = False

    def __post_init__(self) -> None:
        if self.lambda_su < 0 or self.lambda_pt < 0:
            raise ValueError("densities must be nonnegative")
        if not self.sensing_radius > 0:
            raise ValueError("sensing radius must be positive")


def validate_shares(shares, m: int) -> np.ndarray:
    x = np.asarray(shares, dtype=float)
    if x.shape != (m,):
        raise ValueError(f"expected {m} strategy shares, got shape {x.shape}")
    if np.any(x < 0) or abs(float(x.sum()) - 1.0) > SIMPLEX_TOL:
        raise ValueError("shares must be a simplex vector")
    return x


def perception_prob(other_active_density: float, sensing_radius: float) -> float:
    """Probability that at least one active transmitter of a PPP falls inside
    the sensing disk: 1 - exp(-density * pi * R^2)."""
    if other_active_density < 0:
        raise ValueError("density must be nonnegative")
    return -math.expm1(-other_active_density * math.pi * sensing_radius ** 2)


def active_su_density(shares, env: GameEnv) -> float:
    """Transmit-weighted secondary density lambda_SU * sum_i x_i p_i."""
    x = np.asarray(shares, dtype=float)
    return float(env.lambda_su * float(x @ env.strategies.probs))


def _interferer_fields(active_su: float, env: GameEnv, at_su: bool) -> List[InterfererField]:
    ch = env.channel
    fields = []
    if active_su > 0:
        fields.append(InterfererField(active_su, ch.su_power))
    if env.mu.active_density > 0:
        fields.append(InterfererField(env.mu.active_density, ch.mu_power))
    include_pt = env.include_pt_at_su if at_su else env.include_pt_at_pr
    if include_pt and env.lambda_pt > 0:
        fields.append(InterfererField(env.lambda_pt, ch.pt_power))
    return fields


def link_success_probs(shares, env: GameEnv) -> Tuple[float, float]:
    """(secondary, primary) link success probabilities under the current field."""
    act = active_su_density(shares, env)
    ch = env.channel
    s_su = success_prob(ch.su_link_distance, ch.su_power, ch.su_sinr_threshold,
                        _interferer_fields(act, env, at_su=True), ch)
    s_pr = success_prob(ch.pt_link_distance, ch.pt_power, ch.pr_sinr_threshold,
                        _interferer_fields(act, env, at_su=False), ch)
    return s_su, s_pr


def perceived_prob(shares, env: GameEnv) -> float:
    """Probability a transmitting SU perceives an accomplice: proximity perception
    of the active SU+MU field, OR'd with the MU inducement signal."""
    act = active_su_density(shares, env)
    q_local = perception_prob(act + env.mu.active_density, env.sensing_radius)
    return 1.0 - (1.0 - q_local) * (1.0 - env.mu.inducement)


def access_payoff(p: float, q: float, s: float, payoffs: PayoffParams) -> float:
    """Expected payoff of access probability p given perception prob q and
    transmission success prob s: (1-p)*kappa + p*q*(delta*s - nu*(1-s))."""
    return (1.0 - p) * payoffs.kappa + p * q * (payoffs.delta * s - payoffs.nu * (1.0 - s))


def payoff_vector(shares, env: GameEnv) -> Tuple[np.ndarray, float, float, float]:
    """Per-strategy mean-field payoffs plus the (q, s_su, s_pr) diagnostics."""
    x = np.asarray(shares, dtype=float)
    q = perceived_prob(x, env)
    s_su, s_pr = link_success_probs(x, env)
    pi = np.array([access_payoff(p, q, s_su, env.payoffs) for p in env.strategies.access_probs])
    return pi, q, s_su, s_pr


def strategy_payoff(i: int, shares, env: GameEnv) -> float:
    """Mean-field payoff of strategy i at population state `shares`."""
    pi, _, _, _ = payoff_vector(shares, env)
    return float(pi[i])


def replicator_step(shares, payoffs, h: float) -> np.ndarray:
    """One Euler step of continuous replicator dynamics, renormalized to the simplex.

    Payoffs are anchored to the first strategy before averaging so a common
    additive shift cancels structurally, not just in exact arithmetic. If the
    step would drive a share negative, h is halved (at most 40 times).
    """
    x = np.asarray(shares, dtype=float)
    pi = np.asarray(payoffs, dtype=float)
    if not h > 0:
        raise ValueError("step size must be positive")
    if not np.all(np.isfinite(pi)):
        raise ValueError("replicator step could not keep shares nonnegative: non-finite payoffs")
    rel = pi - pi[0]
    mean_rel = float(x @ rel)
    dev = rel - mean_rel
    step = h
    for _ in range(41):
        factors = 1.0 + step * dev
        if np.all(factors[x > 0] >= 0.0):
            break
        step *= 0.5
    else:
        raise ValueError("replicator step could not keep shares nonnegative")
    new = x * factors
    return new / new.sum()


@dataclass(frozen=True)
class StepRecord:
    """Pre-update state of one dynamics step plus derived channel metrics."""

    t: int
    shares: np.ndarray
    payoffs: np.ndarray
    q: float
    s_su: float
    s_pr: float
    active_su_density: float
    mu: MuDrive
    pr_median_sinr: float = math.nan
    su_median_sinr: float = math.nan


@dataclass(frozen=True)
class Trajectory:
    records: List[StepRecord]
    final_shares: np.ndarray


def transmitting_share(shares, env: Optional[GameEnv] = None, probs: Optional[np.ndarray] = None) -> float:
    """Total share on strategies with positive access probability."""
    x = np.asarray(shares, dtype=float)
    if probs is None:
        if env is None:
            raise ValueError("need either env or probs")
        probs = env.strategies.probs
    return float(x[np.asarray(probs) > 0].sum())


def run_dynamics(
    x0,
    env: GameEnv,
    mu_schedule: MuSchedule,
    steps: int,
    h: float,
    compute_sinr: bool = True,
    freeze_shares: bool = False,
) -> Trajectory:
    """Iterate payoff evaluation and replicator steps under a malicious-user schedule.

    The schedule is consulted before each step with the currently observed
    active secondary density, so withdrawal rules react to the population the
    attacker has just seen. Records hold the pre-update state of every step.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    x = validate_shares(x0, len(env.strategies))
    ch = env.channel
    records: List[StepRecord] = []
    for t in range(steps):
        act = active_su_density(x, env)
        drive = mu_schedule(t, act)
        env_t = replace(env, mu=drive)
        pi, q, s_su, s_pr = payoff_vector(x, env_t)
        if compute_sinr:
            pr_med = median_sinr(ch.pt_link_distance, ch.pt_power, _interferer_fields(act, env_t, at_su=False), ch)
            su_med = median_sinr(ch.su_link_distance, ch.su_power, _interferer_fields(act, env_t, at_su=True), ch)
        else:
            pr_med = su_med = math.nan
        records.append(
            StepRecord(t=t, shares=x.copy(), payoffs=pi, q=q, s_su=s_su, s_pr=s_pr,
                       active_su_density=act, mu=drive, pr_median_sinr=pr_med, su_median_sinr=su_med)
        )
        if not freeze_shares:
            x = replicator_step(x, pi, h)
    return Trajectory(records=records, final_shares=x)


@dataclass(frozen=True)
class DynamicsParams:
    """Initial state and integration knobs shared by forecasts and sweeps."""

    x0: Tuple[float, ...] = (0.99, 0.01)
    h: float = 0.1
    steps: int = 400
    extinction_tol: float = 1e-3


@dataclass(frozen=True)
class Classification:
    label: str  # "robust" | "fragile"
    terminal_mutant_share: float
    peak_mutant_share: float
    boundary: bool = False


def classify_operating_point(
    env: GameEnv,
    schedule_factory: Callable[[], MuSchedule],
    dynamics: DynamicsParams,
    density_cap: Optional[float] = None,
) -> Classification:
    """Run the attack template from the configured start and classify the rest state.

    Fragile if the terminal transmit-weighted density violates the primary
    outage cap; robust if induced transmitters go extinct; otherwise the sign
    of the terminal payoff drift decides, with zero drift counted fragile
    (conservative from the defender's side).
    """
    cap = max_allowable_su_density(env.channel) if density_cap is None else density_cap
    traj = run_dynamics(np.asarray(dynamics.x0), env, schedule_factory(), dynamics.steps, dynamics.h,
                        compute_sinr=False)
    probs = env.strategies.probs
    x_T = traj.final_shares
    terminal = transmitting_share(x_T, probs=probs)
    peak = max(transmitting_share(r.shares, probs=probs) for r in traj.records)
    peak = max(peak, terminal)
    active_T = active_su_density(x_T, env)
    if active_T > cap:
        return Classification("fragile", terminal, peak)
    if terminal < dynamics.extinction_tol:
        return Classification("robust", terminal, peak)
    last_mu = traj.records[-1].mu
    pi, _, _, _ = payoff_vector(x_T, replace(env, mu=last_mu))
    mean_pay = float(x_T @ pi)
    transmit_pay = float(x_T[probs > 0] @ pi[probs > 0]) / terminal
    drift = transmit_pay - mean_pay
    if drift > 0:
        return Classification("fragile", terminal, peak)
    if drift < 0:
        return Classification("robust", terminal, peak)
    return Classification("fragile", terminal, peak, boundary=True)


def find_rest_points(env: GameEnv, grid: int = 2001, tol: float = 1e-9) -> List[Tuple[float, str]]:
    """Rest points of the two-strategy dynamics as (mutant share, stability tag).

    Scans the payoff gap g(x) = pi_transmit - pi_silent for sign changes and
    refines each by bisection; endpoints are tagged from the adjacent gap sign.
    For more than two strategies, falls back to multi-start dynamics and
    reports the distinct limits reached.
    """
    probs = env.strategies.probs
    if len(probs) != 2:
        return _rest_points_multistart(env)

    def g(x: float) -> float:
        shares = np.array([1.0 - x, x])
        pi, _, _, _ = payoff_vector(shares, env)
        return float(pi[1] - pi[0])

    xs = np.linspace(0.0, 1.0, grid)
    gs = np.array([g(x) for x in xs])
    out: List[Tuple[float, str]] = []

    g0, g1 = gs[0], gs[-1]
    out.append((0.0, "stable" if g0 < -tol else ("unstable" if g0 > tol else "neutral")))
    for i in range(grid - 1):
        a, b = gs[i], gs[i + 1]
        if a == 0.0 and 0 < i:  # grid point exactly on a root
            out.append((float(xs[i]), "neutral"))
            continue
        if a * b < 0:
            lo, hi = float(xs[i]), float(xs[i + 1])
            glo = a
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                gm = g(mid)
                if glo * gm <= 0:
                    hi = mid
                else:
                    lo, glo = mid, gm
            root = 0.5 * (lo + hi)
            out.append((root, "stable" if a > 0 else "unstable"))
    out.append((1.0, "stable" if g1 > tol else ("unstable" if g1 < -tol else "neutral")))
    return out


def _rest_points_multistart(env: GameEnv, starts: int = 8, steps: int = 4000, h: float = 0.1):
    rng = np.random.default_rng(0)
    m = len(env.strategies)
    limits: List[Tuple[float, str]] = []
    seen: List[np.ndarray] = []
    for _ in range(starts):
        x = rng.dirichlet(np.ones(m))
        for _ in range(steps):
            pi, _, _, _ = payoff_vector(x, env)
            x = replicator_step(x, pi, h)
        if not any(np.allclose(x, s, atol=1e-4) for s in seen):
            seen.append(x.copy())
            limits.append((transmitting_share(x, probs=env.strategies.probs), "stable"))
    return limits
