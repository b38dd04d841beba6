"""Training-free trajectory-prediction baselines.

Physics-based predictor family over a planar 4-state [px, py, vx, vy]:
constant velocity, curvature-decay CV, lane snapping, Gaussian lane
keeping (Bayesian CV/lane-snapping fusion), and IDM-interactive
variants with online particle-filter parameter estimation, plus
ADE/FDE evaluation tooling over trajectory datasets.
"""

from .geometry import (LaneCenterline, LaneGeometryError, LaneProjection,
                       Point2, frenet_to_cartesian, load_lane_map, project,
                       tangent_angle)
from .motion_models import (CurvatureConfig, GaussianBelief, KinematicState,
                            NoiseConfig, PredictionConfig, PredictionTrace,
                            StationaryVehicleError, cv_matrix, cv_predict,
                            curvature_cv_predict, glk_predict, glk_step,
                            ls_jacobian, ls_mean, ls_predict, wrap_angle)
from .interaction import (IDMParams, LeadInfo, Particle, ParticleSet,
                          find_lead, glk_idm_predict, idm_accel,
                          idm_velocity_step, ls_idm_predict, pf_best,
                          pf_init, pf_update)
from .multimodal import (AssociationConfig, LaneAssociation, Mode, ModeSet,
                         associate_lanes, mode_probabilities,
                         multimodal_predict)
from .dataset import (ColumnMap, DatasetError, EvalWindow, RawTrack,
                      ResampledTrack, Scene, load_tracks, make_windows,
                      resample_and_differentiate)
from .metrics import (ErrorRecord, SummaryRow, ade_fde, min_over_modes,
                      sorted_errors, summarize)
from .config import MODEL_NAMES, ConfigError, RunConfig, load_config

__version__ = "0.1.0"
