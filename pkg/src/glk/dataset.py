"""Trajectory table ingestion and evaluation-window generation.

Input trajectories are delimited text tables (header row required),
one row per agent per frame. Tracks are resampled onto a fixed time
grid by linear interpolation; velocities come from central differences
of position and accelerations from differencing the speed series, so
the derived accelerations stay as noisy as the raw data unless a
smoothing window is configured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .geometry import LaneCenterline
from .motion_models import KinematicState


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ColumnMap:
    """Names of the input columns. Defaults follow the CitySim layout
    (frame index at a fixed fps, positions in feet, speed in mph);
    positions are converted to meters by the loader's unit_scale and
    speed by speed_scale. Set `time` to use a time column directly
    instead of frame/fps."""

    agent: str = "carId"
    x: str = "carCenterXft"
    y: str = "carCenterYft"
    frame: Optional[str] = "frameNum"
    time: Optional[str] = None
    speed: Optional[str] = None
    heading: Optional[str] = None
    fps: float = 30.0
    speed_scale: float = 0.44704


@dataclass
class RawTrack:
    """Time-ordered samples for one agent, in meters/seconds."""

    agent_id: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    speed: Optional[np.ndarray] = None
    heading: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.t) < 2:
            raise DatasetError(f"track {self.agent_id}: needs >= 2 samples")
        if np.any(np.diff(self.t) <= 0):
            raise DatasetError(f"track {self.agent_id}: times must strictly increase")


def load_tracks(path, column_map: ColumnMap = ColumnMap(),
                unit_scale: float = 1.0) -> tuple[list[RawTrack], int]:
    """Parse a trajectory table into per-agent tracks.

    Returns (tracks, skipped_rows). Rows with unparseable values in a
    mapped column, or duplicating an agent's timestamp, are counted and
    skipped. Tracks left with fewer than 2 samples are dropped.
    """
    cm = column_map
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"{path}: empty file") from None
    if df.empty:
        raise DatasetError(f"{path}: no data rows")

    needed = [cm.agent, cm.x, cm.y]
    needed.append(cm.time if cm.time else cm.frame)
    for opt in (cm.speed, cm.heading):
        if opt:
            needed.append(opt)
    missing = [c for c in needed if c and c not in df.columns]
    if missing:
        raise DatasetError(f"{path}: missing mapped columns {missing}")

    numeric_cols = [c for c in needed if c != cm.agent]
    sub = df[needed].copy()
    for c in numeric_cols:
        sub[c] = pd.to_numeric(sub[c], errors="coerce")
    bad = sub[numeric_cols].isna().any(axis=1)
    skipped = int(bad.sum())
    sub = sub[~bad]

    if cm.time:
        sub["_t"] = sub[cm.time]
    else:
        sub["_t"] = sub[cm.frame] / cm.fps

    tracks = []
    for agent_id, grp in sub.groupby(cm.agent, sort=True):
        grp = grp.sort_values("_t", kind="mergesort")
        dup = grp["_t"].duplicated(keep="first")
        skipped += int(dup.sum())
        grp = grp[~dup]
        if len(grp) < 2:
            skipped += len(grp)
            continue
        tracks.append(RawTrack(
            agent_id=str(agent_id),
            t=grp["_t"].to_numpy(dtype=float),
            x=grp[cm.x].to_numpy(dtype=float) * unit_scale,
            y=grp[cm.y].to_numpy(dtype=float) * unit_scale,
            speed=(grp[cm.speed].to_numpy(dtype=float) * cm.speed_scale
                   if cm.speed else None),
            heading=(grp[cm.heading].to_numpy(dtype=float)
                     if cm.heading else None),
        ))
    return tracks, skipped


@dataclass
class ResampledTrack:
    """Track on the shared grid with derived velocity, speed and
    acceleration series. Grid times are exact multiples of dt_grid
    (grid_start is the integer multiple index of the first time)."""

    agent_id: str
    dt_grid: float
    grid_start: int
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    speed: np.ndarray
    accel: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return (self.grid_start + np.arange(len(self.x))) * self.dt_grid

    def __len__(self) -> int:
        return len(self.x)

    def index_of(self, t: float) -> Optional[int]:
        """Grid index of time t, or None when t is off-grid or outside
        the track."""
        k = t / self.dt_grid
        ki = int(round(k))
        if abs(k - ki) > 1e-6:
            return None
        i = ki - self.grid_start
        if 0 <= i < len(self.x):
            return i
        return None

    def state_at(self, index: int) -> KinematicState:
        return KinematicState(float(self.x[index]), float(self.y[index]),
                              float(self.vx[index]), float(self.vy[index]))


def _central_diff(y: np.ndarray, dt: float) -> np.ndarray:
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * dt)
    d[0] = (y[1] - y[0]) / dt
    d[-1] = (y[-1] - y[-2]) / dt
    return d


def _moving_average(y: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    padded = np.pad(y, half, mode="edge")
    kernel = np.full(window, 1.0 / window)
    return np.convolve(padded, kernel, mode="valid")


def resample_and_differentiate(track: RawTrack, dt_grid: float,
                               smooth_window: int = 0) -> ResampledTrack:
    """Interpolate a track onto the dt_grid time grid and derive
    velocity (central differences of position) and acceleration
    (differences of the speed series; the dataset speed column when
    present, |v| otherwise).

    smooth_window >= 3 (odd) applies a centered moving average to the
    acceleration series only, for particle-filter observations.
    """
    if dt_grid <= 0:
        raise DatasetError("dt_grid must be positive")
    k_start = math.ceil(track.t[0] / dt_grid - 1e-9)
    k_end = math.floor(track.t[-1] / dt_grid + 1e-9)
    if k_end - k_start + 1 < 2:
        raise DatasetError(
            f"track {track.agent_id}: shorter than 2 grid points at dt={dt_grid}")
    tg = np.arange(k_start, k_end + 1) * dt_grid
    x = np.interp(tg, track.t, track.x)
    y = np.interp(tg, track.t, track.y)
    vx = _central_diff(x, dt_grid)
    vy = _central_diff(y, dt_grid)
    if track.speed is not None:
        speed = np.interp(tg, track.t, track.speed)
    else:
        speed = np.hypot(vx, vy)
    accel = _central_diff(speed, dt_grid)
    if smooth_window >= 3:
        if smooth_window % 2 == 0:
            raise DatasetError("smooth_window must be odd")
        accel = _moving_average(accel, smooth_window)
    return ResampledTrack(agent_id=track.agent_id, dt_grid=dt_grid,
                          grid_start=k_start, x=x, y=y, vx=vx, vy=vy,
                          speed=speed, accel=accel)


@dataclass(frozen=True)
class Scene:
    """All tracks on one shared grid plus the lane map."""

    tracks: tuple[ResampledTrack, ...]
    lanes: tuple[LaneCenterline, ...]
    dt_grid: float

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "lanes", tuple(self.lanes))

    def track(self, agent_id: str) -> ResampledTrack:
        for tr in self.tracks:
            if tr.agent_id == agent_id:
                return tr
        raise KeyError(agent_id)

    def states_at(self, t: float, exclude: Optional[str] = None) -> list[KinematicState]:
        """States of all agents present at grid time t."""
        out = []
        for tr in self.tracks:
            if exclude is not None and tr.agent_id == exclude:
                continue
            i = tr.index_of(t)
            if i is not None:
                out.append(tr.state_at(i))
        return out


@dataclass(frozen=True)
class EvalWindow:
    """One prediction task: everything up to t0 is observable, the
    future holds ground-truth states at t0 + dt, ..., t0 + horizon."""

    agent_id: str
    t0: float
    history: np.ndarray  # (m, 4) states on the grid up to and including t0
    future: np.ndarray   # (n_steps, 4) states at the prediction stride

    @property
    def x0(self) -> KinematicState:
        return KinematicState.from_vector(self.history[-1])

    @property
    def future_positions(self) -> np.ndarray:
        return self.future[:, :2]


def make_windows(scene: Scene, stride: float, horizon: float,
                 warmup_exclude: float = 0.0,
                 dt: Optional[float] = None) -> list[EvalWindow]:
    """Sliding evaluation windows, one every `stride` seconds per
    agent, starting at each track's first grid time.

    Windows whose future would run past the end of the track are
    dropped; with warmup_exclude > 0, so are windows starting earlier
    than (first appearance + warmup_exclude).
    """
    dt = scene.dt_grid if dt is None else dt
    stride_steps = _exact_multiple(stride, scene.dt_grid, "stride")
    dt_steps = _exact_multiple(dt, scene.dt_grid, "dt")
    n_steps = _exact_multiple(horizon, dt, "horizon")

    windows = []
    for tr in scene.tracks:
        states = np.column_stack([tr.x, tr.y, tr.vx, tr.vy])
        warm_steps = 0
        if warmup_exclude > 0.0:
            warm_steps = math.ceil(warmup_exclude / scene.dt_grid - 1e-9)
        # first stride multiple at or past the warm-up boundary
        k0 = -(-warm_steps // stride_steps) * stride_steps
        for k in range(k0, len(tr), stride_steps):
            last = k + n_steps * dt_steps
            if last >= len(tr):
                break
            future = states[k + dt_steps: last + 1: dt_steps]
            windows.append(EvalWindow(
                agent_id=tr.agent_id,
                t0=float(tr.t[k]),
                history=states[: k + 1],
                future=future,
            ))
    return windows


def _exact_multiple(value: float, base: float, name: str) -> int:
    n = value / base
    ni = int(round(n))
    if ni < 1 or abs(n - ni) > 1e-6:
        raise DatasetError(f"{name} ({value}) must be a positive multiple of {base}")
    return ni
