"""Run configuration: plaintext key=value file with sections, CLI
overrides, and a resolved manifest.

Most protocol parameters have no published reference values, so
reproducibility comes from logging: every run writes a manifest
containing every resolved setting (noise variances included), and the
manifest is itself a loadable config file.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import ColumnMap
from .interaction import DEFAULT_PRIOR_RANGES, PARAM_NAMES
from .motion_models import (CurvatureConfig, NoiseConfig, PredictionConfig)
from .multimodal import AssociationConfig

MODEL_NAMES = ("cv", "curv-cv", "ls-cv", "glk-cv", "ls-idm", "glk-idm")
IDM_MODELS = ("ls-idm", "glk-idm")
# warm-up substitution: the constant-velocity counterpart of each model
CV_COUNTERPART = {"ls-idm": "ls-cv", "glk-idm": "glk-cv"}


class ConfigError(ValueError):
    pass


def _default_ranges() -> dict:
    return dict(DEFAULT_PRIOR_RANGES)


@dataclass
class RunConfig:
    # paths
    trajectories: str = ""
    lane_map: str = ""
    out_dir: str = "glk_out"
    # run protocol
    models: tuple = ("cv", "ls-cv", "glk-cv", "ls-idm", "glk-idm")
    dt: float = 0.1
    horizon: float = 6.0
    stride: float = 0.5
    warmup_exclude: float = 0.0
    seed: int = 0
    workers: int = 1
    # noise (variances; scalar or 4 comma-separated values)
    sigma_cv_sq: tuple = (0.25,)
    sigma_ls_sq: tuple = (0.25,)
    # association thresholds and fallbacks
    d_max: float = 3.5
    theta_max: float = math.pi / 6.0
    tau: float = 0.15
    heading_fallback: float = math.pi / 6.0
    min_speed: float = 0.1
    lead_d_max: float = 1.75
    # curvature extension
    decay_rate: float = 0.5
    turn_trigger_eps: float = 0.01
    # particle filter
    pf_n: int = 1000
    pf_sigma_a: float = 0.5
    pf_warmup: float = 2.0
    pf_ranges: dict = field(default_factory=_default_ranges)
    # dataset ingestion
    dt_grid: float = 0.1
    unit_scale: float = 0.3048
    smooth_window: int = 0
    fps: float = 30.0
    speed_scale: float = 0.44704
    col_agent: str = "carId"
    col_x: str = "carCenterXft"
    col_y: str = "carCenterYft"
    col_frame: str = "frameNum"
    col_time: str = ""
    col_speed: str = ""
    col_heading: str = ""

    def validate(self) -> None:
        if not self.models:
            raise ConfigError("at least one model is required")
        unknown = [m for m in self.models if m not in MODEL_NAMES]
        if unknown:
            raise ConfigError(
                f"unknown models {unknown}; choose from {list(MODEL_NAMES)}")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        for name, value, base in (("horizon", self.horizon, self.dt),
                                  ("stride", self.stride, self.dt),
                                  ("dt", self.dt, self.dt_grid)):
            n = value / base
            if n < 1 - 1e-9 or abs(n - round(n)) > 1e-6:
                raise ConfigError(f"{name} ({value}) must be a positive "
                                  f"multiple of {base}")
        if self.warmup_exclude < 0:
            raise ConfigError("warmup_exclude must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.pf_n < 1:
            raise ConfigError("pf n_particles must be >= 1")
        # delegate range/positivity checks to the component configs
        self.noise_config()
        self.curvature_config()

    # component-config builders -------------------------------------

    def noise_config(self) -> NoiseConfig:
        def unpack(v):
            return v[0] if len(v) == 1 else v
        try:
            return NoiseConfig(sigma_cv_sq=unpack(self.sigma_cv_sq),
                               sigma_ls_sq=unpack(self.sigma_ls_sq))
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def prediction_config(self) -> PredictionConfig:
        return PredictionConfig(dt=self.dt, horizon=self.horizon,
                                heading_fallback_threshold=self.heading_fallback,
                                min_speed=self.min_speed)

    def assoc_config(self) -> AssociationConfig:
        return AssociationConfig(d_max=self.d_max, theta_max=self.theta_max,
                                 tau=self.tau, min_speed=self.min_speed,
                                 lead_d_max=self.lead_d_max)

    def curvature_config(self) -> CurvatureConfig:
        try:
            return CurvatureConfig(decay_rate=self.decay_rate,
                                   turn_trigger_eps=self.turn_trigger_eps)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def column_map(self) -> ColumnMap:
        return ColumnMap(agent=self.col_agent, x=self.col_x, y=self.col_y,
                         frame=self.col_frame or None,
                         time=self.col_time or None,
                         speed=self.col_speed or None,
                         heading=self.col_heading or None,
                         fps=self.fps, speed_scale=self.speed_scale)


# config key -> RunConfig attribute, per section
_FLOAT_KEYS = {
    "run": {"dt": "dt", "horizon": "horizon", "stride": "stride",
            "warmup_exclude": "warmup_exclude"},
    "thresholds": {k: k for k in ("d_max", "theta_max", "tau",
                                  "heading_fallback", "min_speed",
                                  "lead_d_max")},
    "curvature": {"decay_rate": "decay_rate",
                  "turn_trigger_eps": "turn_trigger_eps"},
    "pf": {"sigma_a": "pf_sigma_a", "warmup": "pf_warmup"},
    "dataset": {k: k for k in ("dt_grid", "unit_scale", "fps", "speed_scale")},
}
_INT_KEYS = {
    "run": {"seed": "seed", "workers": "workers"},
    "pf": {"n_particles": "pf_n"},
    "dataset": {"smooth_window": "smooth_window"},
}


def _parse_floats(text: str, key: str) -> tuple:
    try:
        values = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}")
    return values


def load_config(path) -> RunConfig:
    """Read a config (or manifest) file into a RunConfig."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(path)
    cfg = RunConfig()
    try:
        _apply_parser(cfg, cp)
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None
    return cfg


def _apply_parser(cfg: RunConfig, cp: configparser.ConfigParser) -> None:
    known_sections = {"paths", "run", "noise", "thresholds", "curvature",
                      "pf", "dataset"}
    for section in cp.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown config section [{section}]")
    for section in cp.sections():
        for key, raw in cp.items(section):
            _apply_key(cfg, section, key, raw)


def _apply_key(cfg: RunConfig, section: str, key: str, raw: str) -> None:
    raw = raw.strip()
    if section == "paths":
        if key not in ("trajectories", "lane_map", "out_dir"):
            raise ConfigError(f"unknown key [paths] {key}")
        setattr(cfg, key, raw)
        return
    if section == "run" and key == "models":
        cfg.models = tuple(m.strip() for m in raw.split(",") if m.strip())
        return
    if section == "noise":
        if key not in ("sigma_cv_sq", "sigma_ls_sq"):
            raise ConfigError(f"unknown key [noise] {key}")
        setattr(cfg, key, _parse_floats(raw, key))
        return
    if section == "pf" and key.startswith("range_"):
        name = key[len("range_"):]
        if name not in PARAM_NAMES:
            raise ConfigError(f"unknown IDM parameter range {key}")
        lo_hi = _parse_floats(raw, key)
        if len(lo_hi) != 2:
            raise ConfigError(f"{key}: expected 'low, high'")
        cfg.pf_ranges[name] = (lo_hi[0], lo_hi[1])
        return
    if section == "dataset" and key.startswith("col_"):
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown key [dataset] {key}")
        setattr(cfg, key, raw)
        return
    if key in _FLOAT_KEYS.get(section, {}):
        setattr(cfg, _FLOAT_KEYS[section][key], float(raw))
        return
    if key in _INT_KEYS.get(section, {}):
        setattr(cfg, _INT_KEYS[section][key], int(raw))
        return
    raise ConfigError(f"unknown key [{section}] {key}")


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    """Apply parsed CLI arguments (argparse namespace) on top of the
    file values; None means the flag was not given."""
    if getattr(args, "models", None):
        cfg.models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    for flag, attr in (("horizon", "horizon"), ("dt", "dt"),
                       ("stride", "stride"),
                       ("warmup_exclude", "warmup_exclude"),
                       ("seed", "seed"), ("out", "out_dir"),
                       ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    if getattr(args, "sigma_cv", None) is not None:
        cfg.sigma_cv_sq = (args.sigma_cv,)
    if getattr(args, "sigma_ls", None) is not None:
        cfg.sigma_ls_sq = (args.sigma_ls,)
    return cfg


def write_manifest(cfg: RunConfig, path) -> None:
    """Write every resolved setting as a loadable config file."""
    cp = configparser.ConfigParser()
    cp["paths"] = {
        "trajectories": str(Path(cfg.trajectories).resolve()) if cfg.trajectories else "",
        "lane_map": str(Path(cfg.lane_map).resolve()) if cfg.lane_map else "",
        "out_dir": str(Path(cfg.out_dir).resolve()),
    }
    cp["run"] = {
        "models": ", ".join(cfg.models),
        "dt": repr(cfg.dt),
        "horizon": repr(cfg.horizon),
        "stride": repr(cfg.stride),
        "warmup_exclude": repr(cfg.warmup_exclude),
        "seed": str(cfg.seed),
        "workers": str(cfg.workers),
    }
    cp["noise"] = {
        "sigma_cv_sq": ", ".join(repr(v) for v in cfg.sigma_cv_sq),
        "sigma_ls_sq": ", ".join(repr(v) for v in cfg.sigma_ls_sq),
    }
    cp["thresholds"] = {k: repr(getattr(cfg, k)) for k in
                        ("d_max", "theta_max", "tau", "heading_fallback",
                         "min_speed", "lead_d_max")}
    cp["curvature"] = {k: repr(getattr(cfg, k)) for k in
                       ("decay_rate", "turn_trigger_eps")}
    cp["pf"] = {
        "n_particles": str(cfg.pf_n),
        "sigma_a": repr(cfg.pf_sigma_a),
        "warmup": repr(cfg.pf_warmup),
        **{f"range_{n}": f"{lo!r}, {hi!r}"
           for n, (lo, hi) in ((n, cfg.pf_ranges[n]) for n in PARAM_NAMES)},
    }
    cp["dataset"] = {
        "dt_grid": repr(cfg.dt_grid),
        "unit_scale": repr(cfg.unit_scale),
        "smooth_window": str(cfg.smooth_window),
        "fps": repr(cfg.fps),
        "speed_scale": repr(cfg.speed_scale),
        **{k: getattr(cfg, k) for k in
           ("col_agent", "col_x", "col_y", "col_frame", "col_time",
            "col_speed", "col_heading")},
    }
    with open(path, "w") as fh:
        cp.write(fh)
