"""Non-interactive trajectory predictors.

Four model families operating on a 4-state [px, py, vx, vy]:

* constant velocity (CV): position integrates velocity, heading fixed;
* curvature CV: CV with a geometrically decaying turn rate;
* lane snapping (LS): project onto a lane centerline and advance at
  constant speed along the local lane tangent;
* Gaussian lane keeping (GLK): per-step Bayesian fusion of the CV and
  LS Gaussian predictions. With per-component gains
  k_i = s2cv_i / (s2cv_i + s2ls_i) the fused mean is
  (I-K) A mu + K g(mu) and the fused covariance M Sigma M^T + Sbar
  with M = (I-K) A + K grad_g(mu), Sbar_ii = s2cv_i s2ls_i / (s2cv_i + s2ls_i).

All predictors emit a trace of Gaussian beliefs, one per time step,
starting from a zero prior covariance (the current state is treated as
known). Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import LaneCenterline, LaneProjection, Point2, project

DEFAULT_MIN_SPEED = 0.1
DEFAULT_HEADING_FALLBACK = math.pi / 6.0


class StationaryVehicleError(ValueError):
    """Speed below min_speed: lane-snapping geometry is undefined."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(theta, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


@dataclass(frozen=True)
class KinematicState:
    """Planar state [px, py, vx, vy] in meters / meters per second."""

    px: float
    py: float
    vx: float
    vy: float

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    @property
    def heading(self) -> float:
        return math.atan2(self.vy, self.vx)

    @property
    def position(self) -> Point2:
        return Point2(self.px, self.py)

    def as_vector(self) -> np.ndarray:
        return np.array([self.px, self.py, self.vx, self.vy], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "KinematicState":
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class GaussianBelief:
    """Gaussian over the 4-state: mean vector and 4x4 covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(4)
        cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise ValueError("covariance must be symmetric")

    @property
    def state(self) -> KinematicState:
        return KinematicState.from_vector(self.mean)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.cov)[0])


def _as_var4(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.full(4, arr.item())
    if arr.shape != (4,):
        raise ValueError(f"{name} must be a scalar or 4 values")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


@dataclass(frozen=True)
class NoiseConfig:
    """Per-step process noise variances for the CV and LS models.

    Each may be a single variance applied to all four components or a
    4-vector [px, py, vx, vy]. Defaults are artifact defaults, not
    reported values; runs log the variances actually used.
    """

    sigma_cv_sq: object = 0.25
    sigma_ls_sq: object = 0.25

    def __post_init__(self):
        object.__setattr__(self, "sigma_cv_sq", _as_var4(self.sigma_cv_sq, "sigma_cv_sq"))
        object.__setattr__(self, "sigma_ls_sq", _as_var4(self.sigma_ls_sq, "sigma_ls_sq"))

    @property
    def cv_var(self) -> np.ndarray:
        return self.sigma_cv_sq

    @property
    def ls_var(self) -> np.ndarray:
        return self.sigma_ls_sq

    @property
    def gain(self) -> np.ndarray:
        """Diagonal of K: weight on the lane-snapping component."""
        return self.sigma_cv_sq / (self.sigma_cv_sq + self.sigma_ls_sq)

    @property
    def fused_var(self) -> np.ndarray:
        """Diagonal of the fused per-step noise Sbar."""
        return (self.sigma_cv_sq * self.sigma_ls_sq
                / (self.sigma_cv_sq + self.sigma_ls_sq))


@dataclass(frozen=True)
class PredictionConfig:
    dt: float = 0.1
    horizon: float = 6.0
    heading_fallback_threshold: float = DEFAULT_HEADING_FALLBACK
    min_speed: float = DEFAULT_MIN_SPEED

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least one step")
        if self.min_speed <= 0.0:
            raise ValueError("min_speed must be positive (the snap map "
                             "divides by the speed)")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class CurvatureConfig:
    """Decaying-turn extension of CV. decay_rate in [0, 1]; lower
    decays faster. turn_trigger_eps is the heading-change threshold
    (rad per step) above which the extension engages."""

    decay_rate: float = 0.5
    turn_trigger_eps: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.decay_rate <= 1.0:
            raise ValueError("decay_rate must be in [0, 1]")


@dataclass(frozen=True)
class PredictionTrace:
    """Per-step Gaussian beliefs at times dt, 2*dt, ..., horizon."""

    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(self, "covs", np.asarray(self.covs, dtype=float))

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        for t, m, c in zip(self.times, self.means, self.covs):
            yield float(t), GaussianBelief(m, c)

    @property
    def positions(self) -> np.ndarray:
        return self.means[:, :2]


def cv_matrix(dt: float) -> np.ndarray:
    """State transition of the constant-velocity model."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    A = np.eye(4)
    A[0, 2] = dt
    A[1, 3] = dt
    return A


def _trace(times, means, covs) -> PredictionTrace:
    return PredictionTrace(np.asarray(times), np.stack(means), np.stack(covs))


def cv_predict(x0: KinematicState, cfg: PredictionConfig,
               noise: NoiseConfig) -> PredictionTrace:
    """Constant-velocity rollout: mean A^k x0, covariance
    Sigma_k = A Sigma_{k-1} A^T + Sigma_cv from Sigma_0 = 0."""
    A = cv_matrix(cfg.dt)
    q = np.diag(noise.cv_var)
    mu = x0.as_vector()
    cov = np.zeros((4, 4))
    means, covs = [], []
    for _ in range(cfg.n_steps):
        mu = A @ mu
        cov = A @ cov @ A.T + q
        means.append(mu)
        covs.append(cov)
    times = cfg.dt * np.arange(1, cfg.n_steps + 1)
    return _trace(times, means, covs)


def curvature_cv_predict(x0: KinematicState, delta_theta: float,
                         ccfg: CurvatureConfig, cfg: PredictionConfig,
                         noise: NoiseConfig) -> PredictionTrace:
    """CV with decaying turn rate: at prediction step i the heading
    increments by decay_rate**i * delta_theta (0**0 = 1) before the CV
    step; speed magnitude is preserved."""
    A = cv_matrix(cfg.dt)
    q = np.diag(noise.cv_var)
    speed = x0.speed
    heading = x0.heading
    px, py = x0.px, x0.py
    cov = np.zeros((4, 4))
    means, covs = [], []
    for i in range(cfg.n_steps):
        heading += ccfg.decay_rate ** i * delta_theta
        vx = speed * math.cos(heading)
        vy = speed * math.sin(heading)
        px += vx * cfg.dt
        py += vy * cfg.dt
        cov = A @ cov @ A.T + q
        means.append(np.array([px, py, vx, vy]))
        covs.append(cov)
    times = cfg.dt * np.arange(1, cfg.n_steps + 1)
    return _trace(times, means, covs)


def ls_mean(x: KinematicState, proj: LaneProjection, dt: float) -> KinematicState:
    """Lane-snapping one-step mean: snap the position to the lane
    projection point, advance ||v||*dt along the local tangent, and
    re-aim the velocity along the lane preserving speed magnitude."""
    speed = x.speed
    ct, st = math.cos(proj.theta_l), math.sin(proj.theta_l)
    fx, fy = proj.foot(x.position)
    return KinematicState(px=fx + speed * dt * ct,
                          py=fy + speed * dt * st,
                          vx=speed * ct,
                          vy=speed * st)


def ls_jacobian(x: KinematicState, theta_l: float, dt: float,
                min_speed: float = DEFAULT_MIN_SPEED) -> np.ndarray:
    """Jacobian of the lane-snapping mean w.r.t. the state, under the
    local line approximation of the lane at tangent angle theta_l."""
    speed = x.speed
    if speed < min_speed:
        raise StationaryVehicleError(
            f"speed {speed:.3g} below {min_speed}: jacobian undefined")
    ct, st = math.cos(theta_l), math.sin(theta_l)
    nvx, nvy = x.vx / speed, x.vy / speed
    return np.array([
        [ct * ct, st * ct, dt * ct * nvx, dt * ct * nvy],
        [st * ct, st * st, dt * st * nvx, dt * st * nvy],
        [0.0, 0.0, ct * nvx, ct * nvy],
        [0.0, 0.0, st * nvx, st * nvy],
    ])


def _fused_step(mu: np.ndarray, cov: np.ndarray, proj: LaneProjection,
                k: np.ndarray, sigma_bar: np.ndarray,
                dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One fusion step at a known projection; assumes speed above the
    stationary threshold."""
    A = cv_matrix(dt)
    x = KinematicState.from_vector(mu)
    g = ls_mean(x, proj, dt).as_vector()
    G = ls_jacobian(x, proj.theta_l, dt, min_speed=0.0)
    mu_new = (1.0 - k) * (A @ mu) + k * g
    M = (1.0 - k)[:, None] * A + k[:, None] * G
    cov_new = M @ cov @ M.T + np.diag(sigma_bar)
    cov_new = 0.5 * (cov_new + cov_new.T)
    return mu_new, cov_new


def glk_step(belief: GaussianBelief, lane: LaneCenterline, noise: NoiseConfig,
             dt: float, min_speed: float = DEFAULT_MIN_SPEED) -> GaussianBelief:
    """Single Gaussian-lane-keeping fusion step.

    Below min_speed the lane geometry is undefined: the mean is held
    and the covariance grows by the fused noise only.
    """
    mu = belief.mean
    speed = math.hypot(mu[2], mu[3])
    if speed < min_speed:
        return GaussianBelief(mu, belief.cov + np.diag(noise.fused_var))
    proj = project(Point2(mu[0], mu[1]), lane)
    mu_new, cov_new = _fused_step(mu, belief.cov, proj,
                                  noise.gain, noise.fused_var, dt)
    return GaussianBelief(mu_new, cov_new)


def _fusion_predict(x0: KinematicState, lane: LaneCenterline,
                    noise: NoiseConfig, cfg: PredictionConfig,
                    k: np.ndarray, sigma_bar: np.ndarray) -> PredictionTrace:
    """Shared rollout for the lane-conditioned predictors.

    Per step: project the prior mean, check the heading-deviation
    fallback, then either fuse (CV with LS, gains k) or, once the
    heading deviates beyond the threshold, continue as pure CV for the
    rest of the horizon. Near-stationary steps hold the mean.
    """
    A = cv_matrix(cfg.dt)
    q_cv = np.diag(noise.cv_var)
    mu = x0.as_vector()
    cov = np.zeros((4, 4))
    fallback = False
    means, covs = [], []
    for _ in range(cfg.n_steps):
        speed = math.hypot(mu[2], mu[3])
        if fallback:
            mu = A @ mu
            cov = A @ cov @ A.T + q_cv
        elif speed < cfg.min_speed:
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


def glk_predict(x0: KinematicState, lane: LaneCenterline, noise: NoiseConfig,
                cfg: PredictionConfig) -> PredictionTrace:
    """Gaussian lane keeping rollout from a zero-covariance prior."""
    return _fusion_predict(x0, lane, noise, cfg, noise.gain, noise.fused_var)


def ls_predict(x0: KinematicState, lane: LaneCenterline, noise: NoiseConfig,
               cfg: PredictionConfig) -> PredictionTrace:
    """Pure lane-snapping rollout: the fusion with gain fixed at 1
    (lane component only; CV variances do not enter)."""
    return _fusion_predict(x0, lane, noise, cfg,
                           np.ones(4), noise.ls_var)
