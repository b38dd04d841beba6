import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glk import (LaneCenterline, LaneGeometryError, Point2,
                 frenet_to_cartesian, project, tangent_angle)

from conftest import make_arc_lane
from oracles import polyline_nearest, line_point_distance_signed


class TestConstruction:
    def test_rejects_single_waypoint(self):
        with pytest.raises(LaneGeometryError):
            LaneCenterline("bad", (Point2(0, 0),))

    def test_rejects_duplicate_waypoints(self):
        with pytest.raises(LaneGeometryError):
            LaneCenterline("bad", (Point2(0, 0), Point2(0, 0), Point2(1, 0)))

    def test_rejects_nonfinite_points(self):
        with pytest.raises(LaneGeometryError):
            Point2(math.nan, 0.0)

    def test_cumulative_arc_length(self, straight_lane):
        assert straight_lane.cumulative_s[0] == 0.0
        assert straight_lane.length == 100.0
        assert np.all(np.diff(straight_lane.cumulative_s) > 0)


class TestProject:
    def test_offset_point_on_straight_lane(self, straight_lane):
        p = project(Point2(3, 4), straight_lane)
        assert p.s == pytest.approx(3.0)
        assert p.d == pytest.approx(4.0)   # left of travel is positive
        assert p.theta_l == pytest.approx(0.0)

    def test_on_lane_point(self, straight_lane):
        p = project(Point2(50, 0), straight_lane)
        assert p.s == pytest.approx(50.0)
        assert p.d == pytest.approx(0.0)

    def test_beyond_arc_end(self, arc_lane):
        # point radially outside the (0, 10) end of the quarter circle:
        # projects onto the terminal extension, to the right of travel
        p = project(Point2(0, 12), arc_lane)
        pts = arc_lane._pts
        s_oracle, dist_oracle, i = polyline_nearest(pts, (0.0, 12.0))
        assert p.s == pytest.approx(s_oracle, abs=1e-9)
        assert abs(p.d) == pytest.approx(dist_oracle, abs=1e-9)
        # against the ideal circle: s ~ r*pi/2, d ~ -2 (discretization
        # of the 0.1 m polyline allows a small gap)
        assert p.s == pytest.approx(10 * math.pi / 2, abs=0.05)
        assert p.d == pytest.approx(-2.0, abs=0.05)

    def test_beyond_lane_start_gives_negative_s(self, straight_lane):
        p = project(Point2(-5, 1), straight_lane)
        assert p.s == pytest.approx(-5.0)
        assert p.d == pytest.approx(1.0)

    def test_junction_tie_takes_following_segment(self):
        corner = LaneCenterline("L", (Point2(0, 0), Point2(1, 0), Point2(1, 1)))
        # wedge point beyond the convex corner: nearest is the corner,
        # angles/arc length come from the following segment
        p = project(Point2(1.4, -0.4), corner)
        assert p.s == pytest.approx(1.0)
        assert p.theta_l == pytest.approx(math.pi / 2)

    def test_matches_bruteforce_on_random_polylines(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = rng.integers(2, 12)
            steps = rng.uniform(0.3, 2.0, (n, 1)) * _unit(rng.uniform(-math.pi, math.pi, n))
            pts = np.cumsum(np.vstack([rng.uniform(-5, 5, (1, 2)), steps]), axis=0)
            lane = LaneCenterline("rnd", tuple(Point2(*q) for q in pts))
            p_xy = rng.uniform(-8, 8, 2)
            s_oracle, dist_oracle, i_oracle = polyline_nearest(pts, p_xy)
            proj = project(Point2(*p_xy), lane)
            assert proj.s == pytest.approx(s_oracle, abs=1e-9)
            # d magnitude: perpendicular distance to the chosen
            # segment's line; sign: left-positive
            a, u = pts[i_oracle], lane._tangent[i_oracle]
            assert proj.d == pytest.approx(
                line_point_distance_signed(a, u, p_xy), abs=1e-9)

    def test_sign_flips_when_lane_reversed(self, arc_lane):
        rng = np.random.default_rng(3)
        rev = arc_lane.reversed()
        for _ in range(50):
            s = rng.uniform(1.0, arc_lane.length - 1.0)
            d = rng.uniform(-5, 5)
            p = frenet_to_cartesian(s, d, arc_lane)
            fwd = project(p, arc_lane)
            bwd = project(p, rev)
            assert bwd.d == pytest.approx(-fwd.d, abs=1e-9)
            assert bwd.s == pytest.approx(arc_lane.length - fwd.s, abs=1e-9)


class TestFrenetToCartesian:
    def test_on_lane(self, straight_lane):
        q = frenet_to_cartesian(5.0, 0.0, straight_lane)
        assert (q.x, q.y) == pytest.approx((5.0, 0.0))

    def test_left_offset(self, straight_lane):
        q = frenet_to_cartesian(5.0, 2.0, straight_lane)
        assert (q.x, q.y) == pytest.approx((5.0, 2.0))

    def test_extrapolates_past_ends(self, straight_lane):
        q = frenet_to_cartesian(105.0, 1.0, straight_lane)
        assert (q.x, q.y) == pytest.approx((105.0, 1.0))
        q = frenet_to_cartesian(-3.0, 0.0, straight_lane)
        assert (q.x, q.y) == pytest.approx((-3.0, 0.0))

    def test_round_trip_within_curvature_radius(self):
        # fine sampling per the round-trip contract
        lane = make_arc_lane(10.0, 0.01)
        rng = np.random.default_rng(11)
        for _ in range(300):
            s = rng.uniform(0.5, lane.length - 0.5)
            d = rng.uniform(-8.0, 8.0)  # |d| below the 10 m radius
            p = frenet_to_cartesian(s, d, lane)
            proj = project(p, lane)
            q = frenet_to_cartesian(proj.s, proj.d, lane)
            assert math.hypot(q.x - p.x, q.y - p.y) < 1e-6


class TestTangentAngle:
    def test_straight_lane_along_x(self, straight_lane):
        for s in (0.0, 17.3, 100.0, 120.0, -5.0):
            assert tangent_angle(straight_lane, s) == pytest.approx(0.0)

    def test_straight_lane_along_y(self):
        lane = LaneCenterline("y", (Point2(0, 0), Point2(0, 50)))
        assert tangent_angle(lane, 10.0) == pytest.approx(math.pi / 2)

    def test_quarter_circle_midpoint(self, arc_lane):
        # analytic circle tangent at 45 degrees of arc
        got = tangent_angle(arc_lane, 10.0 * math.pi / 4.0)
        assert got == pytest.approx(3 * math.pi / 4, abs=0.02)

    def test_junction_uses_following_segment(self):
        corner = LaneCenterline("L", (Point2(0, 0), Point2(1, 0), Point2(1, 1)))
        assert tangent_angle(corner, 1.0) == pytest.approx(math.pi / 2)


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-50, 150), y=st.floats(-40, 40))
def test_projection_distance_never_beats_bruteforce(x, y):
    lane = LaneCenterline(
        "zig", (Point2(0, 0), Point2(30, 5), Point2(60, -5), Point2(100, 0)))
    proj = project(Point2(x, y), lane)
    _, dist_oracle, _ = polyline_nearest(lane._pts, (x, y))
    # |d| is a point-line distance for the winning segment, never less
    # than the true polyline distance minus float slack
    assert abs(proj.d) <= dist_oracle + 1e-9


def _unit(angles):
    return np.column_stack([np.cos(angles), np.sin(angles)])
