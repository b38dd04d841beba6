"""Lane centerline geometry: Frenet projection and transforms.

Lane centerlines are piecewise-linear polylines with an arc-length
parametrization. Projection maps a Cartesian point to lane coordinates
(s, d): s is arc length along the polyline, d is the signed lateral
offset, positive to the LEFT of the travel direction. Points beyond
either end of the polyline project onto the infinite extension of the
terminal segment, so s may be negative or exceed the lane length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MIN_SEGMENT_LENGTH = 1e-9


class LaneGeometryError(ValueError):
    """Raised for degenerate lane definitions."""


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise LaneGeometryError("point coordinates must be finite")


@dataclass(frozen=True)
class LaneProjection:
    """Lane coordinates of a projected point.

    s: arc length along the lane (m), d: signed lateral offset (m,
    positive left of travel), theta_l: tangent angle (rad) of the
    segment containing the projection.
    """

    s: float
    d: float
    theta_l: float

    def foot(self, p: Point2) -> tuple[float, float]:
        """Cartesian coordinates of the projection point, recovered
        from the projected point `p` and the local line geometry."""
        return (p.x + self.d * math.sin(self.theta_l),
                p.y - self.d * math.cos(self.theta_l))


@dataclass(frozen=True)
class LaneCenterline:
    """Polyline lane centerline with cached segment geometry.

    Immutable after construction; safe to share across workers.
    """

    id: str
    waypoints: tuple[Point2, ...]
    # derived arrays, filled in __post_init__
    _pts: np.ndarray = field(init=False, repr=False, compare=False)
    _seg: np.ndarray = field(init=False, repr=False, compare=False)
    _seg_len: np.ndarray = field(init=False, repr=False, compare=False)
    _tangent: np.ndarray = field(init=False, repr=False, compare=False)
    _cum_s: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise LaneGeometryError(f"lane {self.id!r}: needs >= 2 waypoints")
        pts = np.array([(w.x, w.y) for w in self.waypoints], dtype=float)
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= MIN_SEGMENT_LENGTH):
            raise LaneGeometryError(
                f"lane {self.id!r}: consecutive waypoints must be distinct")
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_seg", seg)
        object.__setattr__(self, "_seg_len", seg_len)
        object.__setattr__(self, "_tangent", seg / seg_len[:, None])
        cum = np.concatenate(([0.0], np.cumsum(seg_len)))
        object.__setattr__(self, "_cum_s", cum)

    @property
    def cumulative_s(self) -> np.ndarray:
        return self._cum_s

    @property
    def length(self) -> float:
        return float(self._cum_s[-1])

    def reversed(self) -> "LaneCenterline":
        return LaneCenterline(id=self.id, waypoints=self.waypoints[::-1])


def project(p: Point2, lane: LaneCenterline) -> LaneProjection:
    """Project a point onto the lane, returning Frenet coordinates.

    The projection is the global nearest point over all segments.
    Interior segments clamp to their endpoints; the first and last
    segments extend to infinity so off-the-end points still project.
    At junction ties the following segment wins (larger s).
    """
    pts, seg, seg_len, tan = lane._pts, lane._seg, lane._seg_len, lane._tangent
    a = pts[:-1]
    b = pts[1:]
    w = np.asarray([p.x, p.y]) - a
    t = (w * seg).sum(axis=1) / (seg_len ** 2)

    lo = np.zeros(len(seg))
    hi = np.ones(len(seg))
    lo[0] = -np.inf   # extrapolate beyond the first waypoint
    hi[-1] = np.inf   # extrapolate beyond the last waypoint
    tc = np.clip(t, lo, hi)

    foot = a + tc[:, None] * seg
    # exact waypoint feet where clamping applied (keeps junction ties
    # bit-exact); terminal extensions keep the line formula
    snap_hi = np.zeros(len(seg), dtype=bool)
    snap_hi[:-1] = tc[:-1] >= 1.0
    snap_lo = np.zeros(len(seg), dtype=bool)
    snap_lo[1:] = tc[1:] <= 0.0
    foot[snap_hi] = b[snap_hi]
    foot[snap_lo] = a[snap_lo]

    delta = np.asarray([p.x, p.y]) - foot
    dist2 = (delta ** 2).sum(axis=1)
    # argmin on the reversed array prefers the LATER segment at exact ties,
    # i.e. the segment that starts at a shared junction waypoint
    i = len(dist2) - 1 - int(np.argmin(dist2[::-1]))

    s = float(lane._cum_s[i] + tc[i] * seg_len[i])
    ux, uy = tan[i]
    d = float(ux * delta[i, 1] - uy * delta[i, 0])  # cross(u, p - foot)
    return LaneProjection(s=s, d=d, theta_l=math.atan2(uy, ux))


def _segment_index(lane: LaneCenterline, s: float) -> int:
    # side='right' so s exactly at a junction picks the following segment
    i = int(np.searchsorted(lane._cum_s, s, side="right")) - 1
    return min(max(i, 0), len(lane._seg_len) - 1)


def frenet_to_cartesian(s: float, d: float, lane: LaneCenterline) -> Point2:
    """Map lane coordinates (s, d) back to a Cartesian point.

    s outside [0, length] extrapolates along the terminal tangents.
    """
    i = _segment_index(lane, s)
    ux, uy = lane._tangent[i]
    local = s - lane._cum_s[i]
    fx = lane._pts[i, 0] + local * ux
    fy = lane._pts[i, 1] + local * uy
    # left normal of (ux, uy) is (-uy, ux)
    return Point2(fx - d * uy, fy + d * ux)


def tangent_angle(lane: LaneCenterline, s: float) -> float:
    """Heading (rad) of the lane at arc length s; at junctions the
    following segment's angle."""
    i = _segment_index(lane, s)
    ux, uy = lane._tangent[i]
    return math.atan2(uy, ux)


def load_lane_map(path) -> list[LaneCenterline]:
    """Read a lane map file: delimited text with a header row and
    columns lane_id, x, y (meters), rows per lane in travel order."""
    import pandas as pd

    df = pd.read_csv(path)
    required = {"lane_id", "x", "y"}
    missing = required - set(df.columns)
    if missing:
        raise LaneGeometryError(
            f"lane map {path}: missing columns {sorted(missing)}")
    lanes = []
    for lane_id, grp in df.groupby("lane_id", sort=True):
        wps = tuple(Point2(float(r.x), float(r.y)) for r in grp.itertuples())
        lanes.append(LaneCenterline(id=str(lane_id), waypoints=wps))
    return lanes
