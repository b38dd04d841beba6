"""Multi-modal prediction: lane association and per-lane fan-out.

A vehicle is associated with every lane it could plausibly be
following, admitted by a lateral-distance threshold and a heading
threshold against the local lane tangent. Each association becomes one
prediction mode; when nothing is admitted a single constant-velocity
mode covers the unmapped case. Mode probabilities decay exponentially
with heading misalignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import LaneCenterline, project
from .motion_models import (DEFAULT_HEADING_FALLBACK, DEFAULT_MIN_SPEED,
                            KinematicState, PredictionTrace, wrap_angle)


@dataclass(frozen=True)
class AssociationConfig:
    """Admission thresholds and the probability temperature.

    d_max defaults to roughly one lane width; theta_max mirrors the
    heading-fallback threshold of the lane-keeping models. Lead
    detection uses the tighter lead_d_max (about half a lane): a
    vehicle can plausibly be *following* a lane from 3 m away, but is
    only *occupying* it within half a lane width.
    """

    d_max: float = 3.5
    theta_max: float = DEFAULT_HEADING_FALLBACK
    tau: float = 0.15
    min_speed: float = DEFAULT_MIN_SPEED
    lead_d_max: float = 1.75


@dataclass(frozen=True)
class LaneAssociation:
    lane: LaneCenterline
    lateral_dist: float
    heading_diff: float

    @property
    def lane_id(self) -> str:
        return self.lane.id


def associate_lanes(x: KinematicState, lanes: Sequence[LaneCenterline],
                    d_max: float, theta_max: float,
                    min_speed: float = DEFAULT_MIN_SPEED) -> list[LaneAssociation]:
    """All lanes within |d| <= d_max and heading within theta_max,
    sorted by lateral distance, then heading difference.

    Below min_speed the velocity direction is noise, so the heading
    test is waived (heading_diff reported as 0).
    """
    out = []
    for lane in lanes:
        proj = project(x.position, lane)
        lat = abs(proj.d)
        if lat > d_max:
            continue
        if x.speed < min_speed:
            hd = 0.0
        else:
            hd = abs(wrap_angle(x.heading - proj.theta_l))
            if hd > theta_max:
                continue
        out.append(LaneAssociation(lane=lane, lateral_dist=lat, heading_diff=hd))
    out.sort(key=lambda a: (a.lateral_dist, a.heading_diff))
    return out


def mode_probabilities(assocs: Sequence[LaneAssociation],
                       tau: float = 0.15) -> np.ndarray:
    """Softmax over negative heading differences: p_i proportional to
    exp(-heading_diff_i / tau)."""
    if not assocs:
        raise ValueError("cannot assign probabilities to an empty association list")
    hd = np.array([a.heading_diff for a in assocs], dtype=float)
    w = np.exp(-(hd - hd.min()) / tau)
    return w / w.sum()


@dataclass(frozen=True)
class Mode:
    trace: PredictionTrace
    probability: float
    lane_id: Optional[str]  # None marks the CV fallback mode


@dataclass(frozen=True)
class ModeSet:
    modes: tuple[Mode, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ValueError("a mode set needs at least one mode")
        total = sum(m.probability for m in self.modes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mode probabilities sum to {total}, not 1")

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)


LanePredictor = Callable[[KinematicState, LaneCenterline], PredictionTrace]
FallbackPredictor = Callable[[KinematicState], PredictionTrace]


def multimodal_predict(x0: KinematicState, lanes: Sequence[LaneCenterline],
                       lane_predictor: LanePredictor,
                       fallback: FallbackPredictor,
                       cfg: AssociationConfig) -> ModeSet:
    """One prediction mode per admitted lane; the fallback predictor
    (CV, or its curvature variant when the caller arms it) covers the
    no-association case with probability 1."""
    assocs = associate_lanes(x0, lanes, cfg.d_max, cfg.theta_max, cfg.min_speed)
    if not assocs:
        return ModeSet((Mode(fallback(x0), 1.0, None),))
    probs = mode_probabilities(assocs, cfg.tau)
    modes = tuple(Mode(lane_predictor(x0, a.lane), float(p), a.lane_id)
                  for a, p in zip(assocs, probs))
    return ModeSet(modes)
