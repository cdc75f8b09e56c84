"""Radio channel model: power-law path loss, Rayleigh fading, SINR, and
closed-form link success probabilities over Poisson interferer fields.

Received power over distance d is P * G * d^-alpha with G ~ Exp(1) per link.
A link of distance r, power P and SINR threshold eta facing independent
Poisson fields (density lam_k, power P_k) succeeds with probability

    exp(-eta*N*r^alpha/P) * prod_k exp(-lam_k * pi * r^2 * (eta*P_k/P)^(2/alpha) * C(alpha))

where C(alpha) = (2*pi/alpha) / sin(2*pi/alpha); C(4) = pi/2. This is the
unique closed form consistent with Rayleigh fading over superposed
homogeneous PPPs, and it is cross-checked against Monte Carlo in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Region, toroidal_distances


@dataclass(frozen=True)
class ChannelParams:
    """Path loss, noise and per-class link budgets.

    Powers in watts, distances in meters, thresholds as linear SINR ratios,
    outage constraints as probabilities. alpha must exceed 2 or the aggregate
    Poisson-field interference diverges.
    """

    alpha: float = 4.0
    noise: float = 1e-9
    pt_power: float = 0.3
    pt_link_distance: float = 15.0
    pr_sinr_threshold: float = 3.0
    pr_outage_constraint: float = 0.05
    su_power: float = 0.1
    su_link_distance: float = 10.0
    su_sinr_threshold: float = 3.0
    su_outage_constraint: float = 0.1
    mu_power: float = 0.1
    min_distance: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 2:
            raise ValueError("alpha must exceed 2")
        if not self.noise > 0:
            raise ValueError("noise must be positive")
        for name in ("pt_power", "su_power", "mu_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("pt_link_distance", "su_link_distance", "min_distance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("pr_sinr_threshold", "su_sinr_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("pr_outage_constraint", "su_outage_constraint"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass(frozen=True)
class InterfererField:
    """A homogeneous field of active transmitters: density (nodes/m^2) and power (W)."""

    density: float
    power: float

    def __post_init__(self) -> None:
        if self.density < 0:
            raise ValueError("field density must be nonnegative")
        if not self.power > 0:
            raise ValueError("field power must be positive")


def path_loss(d, alpha: float):
    """Distance gain d^-alpha (fading applied separately). d must be positive."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss undefined for nonpositive distance")
    out = d ** (-alpha)
    return float(out) if out.ndim == 0 else out


def sample_fading(rng: np.random.Generator, size=None):
    """Unit-mean exponential fading gain(s)."""
    return rng.exponential(1.0, size=size)


def field_constant(alpha: float) -> float:
    """C(alpha) = (2*pi/alpha) / sin(2*pi/alpha); finite for alpha > 2, pi/2 at alpha = 4."""
    if not alpha > 2:
        raise ValueError("alpha must exceed 2 for convergent interference")
    x = 2.0 * math.pi / alpha
    return x / math.sin(x)


def sinr(
    receiver,
    desired_tx,
    desired_power: float,
    interferers: Sequence,
    params: ChannelParams,
    region: Region,
    rng: np.random.Generator,
    desired_fading: Optional[float] = None,
    interferer_fading: Optional[np.ndarray] = None,
) -> float:
    """One SINR realization at `receiver` with fresh Exp(1) fading per link.

    `interferers` is a sequence of (point, power) pairs. All distances are
    toroidal and clamped below at params.min_distance, which keeps the
    singular d^-alpha law inside its far-field validity range.
    Fading may be overridden for deterministic checks.
    """
    receiver = np.asarray(receiver, dtype=float)
    desired_tx = np.asarray(desired_tx, dtype=float)
    d0 = toroidal_distances(desired_tx[None, :], receiver, region)[0]
    if d0 <= 0:
        raise ValueError("receiver and desired transmitter coincide")
    d0 = max(d0, params.min_distance)
    g0 = float(sample_fading(rng)) if desired_fading is None else float(desired_fading)
    signal = desired_power * g0 * d0 ** (-params.alpha)

    interference = 0.0
    if interferers:
        points = np.asarray([p for p, _ in interferers], dtype=float)
        powers = np.asarray([w for _, w in interferers], dtype=float)
        dists = np.maximum(toroidal_distances(points, receiver, region), params.min_distance)
        if interferer_fading is None:
            gains = sample_fading(rng, size=len(interferers))
        else:
            gains = np.asarray(interferer_fading, dtype=float)
        interference = float(np.sum(powers * gains * dists ** (-params.alpha)))
    return signal / (params.noise + interference)


def success_prob(
    link_distance: float,
    link_power: float,
    eta: float,
    fields: Sequence[InterfererField],
    params: ChannelParams,
) -> float:
    """P[SINR >= eta] for a Rayleigh link over independent Poisson interferer fields."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    c = field_constant(params.alpha)
    exponent = eta * params.noise * link_distance ** params.alpha / link_power
    for f in fields:
        exponent += f.density * math.pi * link_distance ** 2 * (eta * f.power / link_power) ** (2.0 / params.alpha) * c
    return math.exp(-exponent)


def max_allowable_su_density(params: ChannelParams) -> float:
    """Largest active secondary density for which the primary outage constraint
    P[SINR_PR < eta_PR] <= eps_PR still holds; algebraic inversion of success_prob.
    """
    noise_term = (
        params.pr_sinr_threshold * params.noise * params.pt_link_distance ** params.alpha / params.pt_power
    )
    budget = -math.log1p(-params.pr_outage_constraint) - noise_term
    if budget <= 0:
        raise ValueError("noise-limited: no SU density admissible")
    denom = (
        math.pi
        * params.pt_link_distance ** 2
        * (params.pr_sinr_threshold * params.su_power / params.pt_power) ** (2.0 / params.alpha)
        * field_constant(params.alpha)
    )
    return budget / denom


def median_sinr(
    link_distance: float,
    link_power: float,
    fields: Sequence[InterfererField],
    params: ChannelParams,
    rel_tol: float = 1e-6,
) -> float:
    """SINR level eta* with success_prob(eta*) = 0.5, by bisection on log eta.

    Serves as the analytic stand-in for a time-averaged SINR; strictly
    decreasing in every field density. Raises if no median exists inside
    [1e-6, 1e9] (e.g. zero noise and zero interference).
    """
    lo, hi = 1e-6, 1e9

    def s(eta: float) -> float:
        return success_prob(link_distance, link_power, eta, fields, params)

    if s(lo) < 0.5 or s(hi) > 0.5:
        raise ValueError("median SINR outside bracket [1e-6, 1e9]")
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (llo + lhi)
        if s(math.exp(mid)) >= 0.5:
            llo = mid
        else:
            lhi = mid
        if lhi - llo <= rel_tol and abs(s(math.exp(0.5 * (llo + lhi))) - 0.5) <= 1e-7:
            break
    return math.exp(0.5 * (llo + lhi))


def empirical_success_prob(
    link_distance: float,
    link_power: float,
    eta: float,
    fields: Sequence[InterfererField],
    params: ChannelParams,
    region_side: float,
    n_topologies: int,
    n_fading: int,
    rng: np.random.Generator,
    batch: int = 2000,
) -> float:
    """Monte Carlo estimate of success_prob by sampling interferer topologies and fading.

    Independent of the closed form: samples each field as a PPP on a torus
    around the receiver, draws Exp(1) fading per interferer per trial, and
    counts SINR >= eta. Used as the validation oracle for success_prob.
    """
    side = region_side
    half = side / 2.0
    alpha = params.alpha
    thr = eta * params.noise * link_distance ** alpha / link_power  # fading threshold, noise part
    scale = eta * link_distance ** alpha / link_power
    hits = 0
    total = 0
    done = 0
    while done < n_topologies:
        nb = min(batch, n_topologies - done)
        done += nb
        # interference gain sums need per-topology segmentation
        gains_parts = []
        topo_parts = []
        power_parts = []
        for f in fields:
            counts = rng.poisson(f.density * side * side, size=nb)
            npts = int(counts.sum())
            if npts == 0:
                continue
            # receiver at the center of the fundamental domain: wrapped distance
            # equals plain Euclidean distance for every point of the square
            xy = rng.uniform(-half, half, size=(npts, 2))
            d = np.hypot(xy[:, 0], xy[:, 1])
            np.maximum(d, params.min_distance, out=d)
            gains_parts.append(d ** (-alpha))
            topo_parts.append(np.repeat(np.arange(nb), counts))
            power_parts.append(np.full(npts, f.power))
        if gains_parts:
            g = np.concatenate(gains_parts)
            ti = np.concatenate(topo_parts)
            pw = np.concatenate(power_parts)
            for _ in range(n_fading):
                fade = rng.exponential(1.0, size=g.shape[0])
                interf = np.bincount(ti, weights=pw * fade * g, minlength=nb)
                f0 = rng.exponential(1.0, size=nb)
                hits += int(np.count_nonzero(f0 >= thr + scale * interf))
                total += nb
        else:
            f0 = rng.exponential(1.0, size=nb * n_fading)
            hits += int(np.count_nonzero(f0 >= thr))
            total += nb * n_fading
    return hits / total
