"""End-to-end evaluation: scene loading, per-window model rollouts,
particle-filter bookkeeping, and record aggregation.

Work is partitioned by agent: each agent owns its particle filter and
its windows, so agents can be evaluated in parallel without shared
state. Output records are sorted by (agent_id, t0, model) so results
do not depend on scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .config import CV_COUNTERPART, RunConfig
from .dataset import (EvalWindow, ResampledTrack, Scene, load_tracks,
                      make_windows, resample_and_differentiate)
from .geometry import load_lane_map
from .interaction import (ParticleSet, find_lead, glk_idm_predict,
                          ls_idm_predict, pf_init, pf_update)
from .metrics import ErrorRecord, min_over_modes
from .motion_models import (KinematicState, PredictionTrace, cv_predict,
                            curvature_cv_predict, glk_predict, ls_predict,
                            wrap_angle)
from .multimodal import Mode, ModeSet, associate_lanes, multimodal_predict


@dataclass
class SceneStats:
    n_tracks: int
    n_skipped_rows: int
    n_lanes: int


def build_scene(cfg: RunConfig) -> tuple[Scene, SceneStats]:
    lanes = load_lane_map(cfg.lane_map)
    raw_tracks, skipped = load_tracks(cfg.trajectories, cfg.column_map(),
                                      unit_scale=cfg.unit_scale)
    tracks = [resample_and_differentiate(t, cfg.dt_grid, cfg.smooth_window)
              for t in raw_tracks]
    scene = Scene(tracks=tuple(tracks), lanes=tuple(lanes),
                  dt_grid=cfg.dt_grid)
    return scene, SceneStats(n_tracks=len(tracks), n_skipped_rows=skipped,
                             n_lanes=len(lanes))


def _heading_change(track: ResampledTrack, k0: int, dt_steps: int,
                    min_speed: float) -> float:
    """Observed heading change over the last prediction interval,
    0 when the history is too short or the vehicle too slow."""
    k_prev = k0 - dt_steps
    if k_prev < 0:
        return 0.0
    v1 = (track.vx[k_prev], track.vy[k_prev])
    v2 = (track.vx[k0], track.vy[k0])
    if math.hypot(*v1) < min_speed or math.hypot(*v2) < min_speed:
        return 0.0
    return wrap_angle(math.atan2(v2[1], v2[0]) - math.atan2(v1[1], v1[0]))


def predict_modeset(model: str, x0: KinematicState, scene: Scene,
                    cfg: RunConfig, delta_theta: float,
                    others: list[KinematicState],
                    ps: Optional[ParticleSet],
                    time_since_appearance: float) -> ModeSet:
    """Run one model on one window, always returning a mode set.

    IDM models fall back to their constant-velocity counterpart while
    the agent's particle filter is still warming up.
    """
    pcfg = cfg.prediction_config()
    noise = cfg.noise_config()
    assoc = cfg.assoc_config()
    ccfg = cfg.curvature_config()

    def cv_like(x: KinematicState) -> PredictionTrace:
        if abs(delta_theta) > ccfg.turn_trigger_eps:
            return curvature_cv_predict(x, delta_theta, ccfg, pcfg, noise)
        return cv_predict(x, pcfg, noise)

    if model in CV_COUNTERPART and (
            ps is None or time_since_appearance < cfg.pf_warmup - 1e-9):
        model = CV_COUNTERPART[model]

    if model == "cv":
        return ModeSet((Mode(cv_predict(x0, pcfg, noise), 1.0, None),))
    if model == "curv-cv":
        return ModeSet((Mode(cv_like(x0), 1.0, None),))
    if model == "ls-cv":
        lane_pred = lambda x, lane: ls_predict(x, lane, noise, pcfg)
    elif model == "glk-cv":
        lane_pred = lambda x, lane: glk_predict(x, lane, noise, pcfg)
    elif model == "ls-idm":
        lane_pred = lambda x, lane: ls_idm_predict(x, lane, others, noise,
                                                   pcfg, ps, assoc)
    elif model == "glk-idm":
        lane_pred = lambda x, lane: glk_idm_predict(x, lane, others, noise,
                                                    pcfg, ps, assoc)
    else:
        raise ValueError(f"unknown model {model!r}")
    return multimodal_predict(x0, scene.lanes, lane_pred, cv_like, assoc)


def _pf_filter_step(ps: ParticleSet, scene: Scene, cfg: RunConfig,
                    track: ResampledTrack, k: int) -> ParticleSet:
    """One particle-filter update from the observation at grid index k.

    Updates only run when a lead is present; without one the models
    predict zero acceleration for every particle and the weights would
    not change.
    """
    state = track.state_at(k)
    assoc_cfg = cfg.assoc_config()
    assocs = associate_lanes(state, scene.lanes, assoc_cfg.d_max,
                             assoc_cfg.theta_max, assoc_cfg.min_speed)
    if not assocs:
        return ps
    t_k = float(track.t[k])
    others = scene.states_at(t_k, exclude=track.agent_id)
    lead = find_lead(state, others, assocs[0].lane, assoc_cfg)
    if lead is None:
        return ps
    return pf_update(ps, v=float(track.speed[k]), lead=lead,
                     observed_accel=float(track.accel[k]),
                     sigma_a=cfg.pf_sigma_a)


def evaluate_agent(scene: Scene, cfg: RunConfig, track: ResampledTrack,
                   agent_index: int,
                   windows: list[EvalWindow]) -> list[ErrorRecord]:
    """Evaluate every model on every window of one agent.

    The particle filter is advanced along the track in time order and
    snapshotted at each window start, so a window sees exactly the
    observations available up to its t0.
    """
    needs_pf = any(m in CV_COUNTERPART for m in cfg.models)
    ps: Optional[ParticleSet] = None
    if needs_pf:
        ps = pf_init(cfg.pf_ranges, cfg.pf_n, rng_seed=[cfg.seed, agent_index])

    dt_steps = int(round(cfg.dt / scene.dt_grid))
    t_first = float(track.t[0])
    pending = sorted(windows, key=lambda w: w.t0)
    wi = 0
    records: list[ErrorRecord] = []

    for k in range(len(track)):
        if wi >= len(pending):
            break
        if needs_pf:
            ps = _pf_filter_step(ps, scene, cfg, track, k)
            elapsed = float(track.t[k]) - t_first
            if ps.converged_at is None and elapsed >= cfg.pf_warmup - 1e-9:
                ps.converged_at = float(track.t[k])
        while wi < len(pending) and abs(pending[wi].t0 - track.t[k]) < 1e-9:
            w = pending[wi]
            wi += 1
            records.extend(_evaluate_window(scene, cfg, track, w, k,
                                            dt_steps, ps))
    return records


def _evaluate_window(scene: Scene, cfg: RunConfig, track: ResampledTrack,
                     w: EvalWindow, k0: int, dt_steps: int,
                     ps: Optional[ParticleSet]) -> list[ErrorRecord]:
    delta_theta = _heading_change(track, k0, dt_steps, cfg.min_speed)
    others = scene.states_at(w.t0, exclude=w.agent_id)
    gt = w.future_positions
    out = []
    for model in cfg.models:
        modes = predict_modeset(model, w.x0, scene, cfg, delta_theta,
                                others, ps, w.t0 - float(track.t[0]))
        ade, fde, idx = min_over_modes(modes, gt)
        out.append(ErrorRecord(agent_id=w.agent_id, t0=w.t0, model=model,
                               ade=ade, fde=fde, mode_index=idx))
    return out


# -- parallel driver ------------------------------------------------

_WORKER_STATE: dict = {}


def _init_worker(scene: Scene, cfg: RunConfig, by_agent: dict) -> None:
    _WORKER_STATE["args"] = (scene, cfg, by_agent)


def _run_agent(task: tuple) -> list[ErrorRecord]:
    agent_id, agent_index = task
    scene, cfg, by_agent = _WORKER_STATE["args"]
    return evaluate_agent(scene, cfg, scene.track(agent_id), agent_index,
                          by_agent[agent_id])


def evaluate_scene(scene: Scene, cfg: RunConfig) -> list[ErrorRecord]:
    """Evaluate all configured models over all windows of the scene."""
    windows = make_windows(scene, cfg.stride, cfg.horizon,
                           cfg.warmup_exclude, cfg.dt)
    by_agent: dict[str, list[EvalWindow]] = {}
    for w in windows:
        by_agent.setdefault(w.agent_id, []).append(w)

    agent_order = sorted(t.agent_id for t in scene.tracks)
    tasks = [(aid, i) for i, aid in enumerate(agent_order) if aid in by_agent]

    records: list[ErrorRecord] = []
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers,
                                 initializer=_init_worker,
                                 initargs=(scene, cfg, by_agent)) as pool:
            for chunk in pool.map(_run_agent, tasks):
                records.extend(chunk)
    else:
        for aid, idx in tasks:
            records.extend(evaluate_agent(scene, cfg, scene.track(aid), idx,
                                          by_agent[aid]))
    records.sort(key=lambda r: (r.agent_id, r.t0, r.model))
    return records


def pf_state_at(scene: Scene, cfg: RunConfig, agent_id: str,
                t0: float) -> Optional[ParticleSet]:
    """Particle filter for one agent advanced up to (and including) t0;
    None when no IDM model is configured."""
    if not any(m in CV_COUNTERPART for m in cfg.models):
        return None
    track = scene.track(agent_id)
    k_stop = track.index_of(t0)
    if k_stop is None:
        raise KeyError(f"t0 {t0} not on the grid of agent {agent_id}")
    agent_order = sorted(t.agent_id for t in scene.tracks)
    agent_index = agent_order.index(agent_id)
    ps = pf_init(cfg.pf_ranges, cfg.pf_n, rng_seed=[cfg.seed, agent_index])
    t_first = float(track.t[0])
    for k in range(k_stop + 1):
        ps = _pf_filter_step(ps, scene, cfg, track, k)
        if ps.converged_at is None and float(track.t[k]) - t_first >= cfg.pf_warmup - 1e-9:
            ps.converged_at = float(track.t[k])
    return ps
