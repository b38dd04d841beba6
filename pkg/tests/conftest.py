import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from glk import LaneCenterline, Point2


@pytest.fixture
def straight_lane() -> LaneCenterline:
    """The x-axis from 0 to 100 m."""
    return LaneCenterline("x_axis", (Point2(0, 0), Point2(100, 0)))


def make_arc_lane(radius: float = 10.0, spacing: float = 0.1,
                  lane_id: str = "arc") -> LaneCenterline:
    """Quarter circle of given radius, centered at the origin, from
    (r, 0) counter-clockwise to (0, r), sampled every `spacing` meters
    of arc (endpoint included exactly)."""
    arc_len = radius * math.pi / 2.0
    n = int(math.ceil(arc_len / spacing)) + 1
    angles = np.linspace(0.0, math.pi / 2.0, n)
    wps = tuple(Point2(radius * math.cos(a), radius * math.sin(a))
                for a in angles)
    return LaneCenterline(lane_id, wps)


@pytest.fixture
def arc_lane() -> LaneCenterline:
    return make_arc_lane(10.0, 0.1)
