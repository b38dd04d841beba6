"""Car-following interaction: IDM acceleration, lead detection, and
online particle-filter estimation of the IDM parameters.

The intelligent-driver acceleration law maps own speed, bumper gap and
lead speed to an acceleration. With no lead ahead the models hold a
constant velocity instead: a free IDM would accelerate every stopped
car toward its desired speed, which is usually wrong at intersections.

Each vehicle gets a particle filter over the six IDM parameters,
updated from observed (finite-differenced) accelerations with a
Gaussian likelihood and systematic resampling. The highest-weight
particle drives the velocity inside the interactive rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import LaneCenterline, Point2, project
from .motion_models import (KinematicState, NoiseConfig, PredictionConfig,
                            PredictionTrace, cv_matrix, wrap_angle,
                            _fused_step, _trace)
from .multimodal import AssociationConfig

PARAM_NAMES = ("v0", "s0", "s1", "t_headway", "a_max", "b")

# Uniform prior ranges: typical urban driving spans.
DEFAULT_PRIOR_RANGES = {
    "v0": (3.0, 25.0),
    "s0": (0.5, 4.0),
    "s1": (0.0, 5.0),
    "t_headway": (0.5, 3.0),
    "a_max": (0.5, 4.0),
    "b": (0.5, 4.0),
}

DEFAULT_PF_SIZE = 1000
DEFAULT_SIGMA_A = 0.5
DEFAULT_PF_WARMUP = 2.0

# Floor on braking applied inside rollouts. Raw IDM output is unbounded
# below when a gap collapses; predicted vehicles still brake at full
# emergency strength but not beyond physics.
MAX_PREDICTED_BRAKING = 10.0


@dataclass(frozen=True)
class IDMParams:
    """Desired speed, minimal gap, gap agreement parameter, desired
    time headway, max comfortable acceleration, comfortable braking."""

    v0: float
    s0: float
    s1: float
    t_headway: float
    a_max: float
    b: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            if getattr(self, name) <= 0.0 and name != "s1":
                raise ValueError(f"IDM parameter {name} must be positive")
        if self.s1 < 0.0:
            raise ValueError("IDM parameter s1 must be nonnegative")

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)


@dataclass(frozen=True)
class LeadInfo:
    """Bumper-to-bumper gap (m) and lead speed (m/s)."""

    gap: float
    v_lead: float

    def __post_init__(self):
        if self.gap <= 0.0:
            raise ValueError("lead gap must be positive")


def idm_accel(v: float, params: IDMParams, lead: Optional[LeadInfo]) -> float:
    """IDM acceleration; constant velocity (0) when no lead is ahead.

    a = a_max [1 - (v/v0)^4 - (s*/s)^2] with desired gap
    s* = s0 + s1 sqrt(v/v0) + v T + v (v - v_lead) / (2 sqrt(a_max b)),
    floored at 0.
    """
    if lead is None:
        return 0.0
    s_star = (params.s0
              + params.s1 * math.sqrt(v / params.v0)
              + v * params.t_headway
              + v * (v - lead.v_lead) / (2.0 * math.sqrt(params.a_max * params.b)))
    s_star = max(0.0, s_star)
    return params.a_max * (1.0 - (v / params.v0) ** 4 - (s_star / lead.gap) ** 2)


def _idm_accel_batch(v: float, params: np.ndarray,
                     lead: Optional[LeadInfo]) -> np.ndarray:
    """idm_accel over an (n, 6) parameter array."""
    if lead is None:
        return np.zeros(len(params))
    v0, s0, s1, T, a_max, b = params.T
    s_star = s0 + s1 * np.sqrt(v / v0) + v * T + v * (v - lead.v_lead) / (2.0 * np.sqrt(a_max * b))
    s_star = np.maximum(0.0, s_star)
    return a_max * (1.0 - (v / v0) ** 4 - (s_star / lead.gap) ** 2)


def idm_velocity_step(v: float, a: float, dt: float) -> float:
    """Integrate speed one step, floored at 0 (braking never reverses)."""
    return max(0.0, v + a * dt)


def find_lead(agent: KinematicState, others: Sequence[KinematicState],
              lane: LaneCenterline, assoc_cfg: AssociationConfig) -> Optional[LeadInfo]:
    """Closest same-lane agent ahead of us along the lane, if any.

    Others must lie within the lane-occupancy width (lead_d_max, about
    half a lane: vehicles on adjacent or diverging paths project onto
    our lane at small longitudinal gaps and would otherwise trigger
    absurd braking) and roughly share the lane heading; near-stationary
    others skip the heading test (their velocity direction is noise).
    Gap is the arc-length separation (no vehicle lengths available).
    """
    s_self = project(agent.position, lane).s
    best: Optional[tuple[float, float]] = None
    for other in others:
        proj = project(other.position, lane)
        if abs(proj.d) > assoc_cfg.lead_d_max:
            continue
        if other.speed >= assoc_cfg.min_speed:
            hd = abs(wrap_angle(other.heading - proj.theta_l))
            if hd > assoc_cfg.theta_max:
                continue
        ds = proj.s - s_self
        if ds <= 0.0:
            continue
        if best is None or ds < best[0]:
            best = (ds, other.speed)
    if best is None:
        return None
    return LeadInfo(gap=best[0], v_lead=best[1])


@dataclass(frozen=True)
class Particle:
    params: IDMParams
    weight: float


@dataclass
class ParticleSet:
    """Weighted IDM-parameter hypotheses for one vehicle.

    param_array rows follow PARAM_NAMES order. The generator is owned
    by the set so a fixed seed fixes the whole update/resample
    sequence. Single writer per agent; predictors read snapshots.
    """

    param_array: np.ndarray
    weights: np.ndarray
    rng: np.random.Generator
    converged_at: Optional[float] = None

    def __post_init__(self):
        if len(self.param_array) == 0:
            raise ValueError("particle set must be nonempty")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("particle weights must sum to 1")

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def particles(self) -> list[Particle]:
        return [Particle(IDMParams(*(float(v) for v in row)), float(w))
                for row, w in zip(self.param_array, self.weights)]

    def effective_sample_size(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))


def pf_init(prior_ranges: Optional[dict] = None, n: int = DEFAULT_PF_SIZE,
            rng_seed=0) -> ParticleSet:
    """Draw n particles uniformly from per-parameter ranges, uniform
    weights. Degenerate ranges (lo == hi) pin that parameter."""
    ranges = dict(DEFAULT_PRIOR_RANGES)
    if prior_ranges:
        ranges.update(prior_ranges)
    rng = np.random.default_rng(rng_seed)
    cols = []
    for name in PARAM_NAMES:
        lo, hi = ranges[name]
        if hi < lo:
            raise ValueError(f"prior range for {name} is inverted")
        cols.append(lo + (hi - lo) * rng.random(n))
    return ParticleSet(param_array=np.column_stack(cols),
                       weights=np.full(n, 1.0 / n),
                       rng=rng)


def pf_update(ps: ParticleSet, v: float, lead: Optional[LeadInfo],
              observed_accel: float, sigma_a: float = DEFAULT_SIGMA_A) -> ParticleSet:
    """Reweight by the Gaussian likelihood of the observed acceleration
    under each particle's IDM prediction; systematic resampling when
    the effective sample size drops below half the particle count.

    If every likelihood underflows to zero the weights reset to
    uniform (divergence recovery).
    """
    if sigma_a <= 0.0:
        raise ValueError("sigma_a must be positive")
    pred = _idm_accel_batch(v, ps.param_array, lead)
    resid = (observed_accel - pred) / sigma_a
    lik = np.exp(-0.5 * resid ** 2)
    w = ps.weights * lik
    total = w.sum()
    n = len(ps)
    if not np.isfinite(total) or total <= 0.0:
        w = np.full(n, 1.0 / n)
    else:
        w = w / total
    params = ps.param_array
    ess = 1.0 / np.sum(w ** 2)
    if ess < n / 2.0:
        params, w = _systematic_resample(params, w, ps.rng)
    return ParticleSet(param_array=params, weights=w, rng=ps.rng,
                       converged_at=ps.converged_at)


def _systematic_resample(params: np.ndarray, weights: np.ndarray,
                         rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = len(weights)
    positions = (np.arange(n) + rng.random()) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard against cumsum rounding
    idx = np.searchsorted(cumulative, positions, side="left")
    return params[idx].copy(), np.full(n, 1.0 / n)


def pf_best(ps: ParticleSet) -> IDMParams:
    """Parameters of the highest-weight particle (first on ties)."""
    i = int(np.argmax(ps.weights))
    return IDMParams(*(float(v) for v in ps.param_array[i]))


def _idm_fusion_predict(x0: KinematicState, lane: LaneCenterline,
                        others: Sequence[KinematicState], noise: NoiseConfig,
                        cfg: PredictionConfig, ps: ParticleSet,
                        assoc_cfg: AssociationConfig,
                        k: np.ndarray, sigma_bar: np.ndarray) -> PredictionTrace:
    """Lane-keeping rollout with the speed magnitude driven by IDM.

    Before each step the prior speed is replaced by one IDM velocity
    step under the best-particle parameters against the closest lead;
    leads are re-detected each step against constant-velocity
    propagation of the other agents. Once the heading fallback trips,
    the remainder of the horizon is plain CV.
    """
    params = pf_best(ps)
    A = cv_matrix(cfg.dt)
    q_cv = np.diag(noise.cv_var)
    mu = x0.as_vector()
    cov = np.zeros((4, 4))
    others_v = [o.as_vector() for o in others]
    fallback = False
    means, covs = [], []
    for i in range(cfg.n_steps):
        if fallback:
            mu = A @ mu
            cov = A @ cov @ A.T + q_cv
            means.append(mu)
            covs.append(cov)
            continue

        t_ahead = i * cfg.dt
        propagated = [KinematicState(o[0] + o[2] * t_ahead, o[1] + o[3] * t_ahead,
                                     o[2], o[3]) for o in others_v]
        cur = KinematicState.from_vector(mu)
        lead = find_lead(cur, propagated, lane, assoc_cfg)
        speed = cur.speed
        accel = max(idm_accel(speed, params, lead), -MAX_PREDICTED_BRAKING)
        new_speed = idm_velocity_step(speed, accel, cfg.dt)

        if speed >= cfg.min_speed:
            mu = mu.copy()
            mu[2:] *= new_speed / speed
        elif new_speed >= cfg.min_speed:
            # pulling away from standstill: aim along the lane
            proj = project(Point2(mu[0], mu[1]), lane)
            mu = mu.copy()
            mu[2] = new_speed * math.cos(proj.theta_l)
            mu[3] = new_speed * math.sin(proj.theta_l)

        speed = math.hypot(mu[2], mu[3])
        if speed < cfg.min_speed:
            cov = cov + np.diag(sigma_bar)
        else:
            proj = project(Point2(mu[0], mu[1]), lane)
            theta_v = wrap_angle(math.atan2(mu[3], mu[2]) - proj.theta_l)
            if abs(theta_v) > cfg.heading_fallback_threshold:
                fallback = True
                mu = A @ mu
                cov = A @ cov @ A.T + q_cv
            else:
                mu, cov = _fused_step(mu, cov, proj, k, sigma_bar, cfg.dt)
        means.append(mu)
        covs.append(cov)
    times = cfg.dt * np.arange(1, cfg.n_steps + 1)
    return _trace(times, means, covs)


def glk_idm_predict(x0: KinematicState, lane: LaneCenterline,
                    others: Sequence[KinematicState], noise: NoiseConfig,
                    cfg: PredictionConfig, ps: ParticleSet,
                    assoc_cfg: AssociationConfig) -> PredictionTrace:
    """Gaussian lane keeping with IDM-driven speed."""
    return _idm_fusion_predict(x0, lane, others, noise, cfg, ps, assoc_cfg,
                               noise.gain, noise.fused_var)


def ls_idm_predict(x0: KinematicState, lane: LaneCenterline,
                   others: Sequence[KinematicState], noise: NoiseConfig,
                   cfg: PredictionConfig, ps: ParticleSet,
                   assoc_cfg: AssociationConfig) -> PredictionTrace:
    """Pure lane snapping with IDM-driven speed (fusion gain 1)."""
    return _idm_fusion_predict(x0, lane, others, noise, cfg, ps, assoc_cfg,
                               np.ones(4), noise.ls_var)
