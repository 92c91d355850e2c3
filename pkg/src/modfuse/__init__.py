"""Modular covariance-intersection fusion with a bearing-localization benchmark.

The package has three layers: domain-agnostic fusion primitives
(:mod:`modfuse.fusion`), their instantiation for the SE(2) robot / planar
landmark problem (:mod:`modfuse.robot`), and a reproducible Monte Carlo
benchmark harness with reporting (:mod:`modfuse.scenario`,
:mod:`modfuse.report`, :mod:`modfuse.cli`).
"""

from .fusion import (
    ALPHA_MIN,
    FusionPolicy,
    GaussianEstimate,
    NoisyMeasurement,
    RelativeMeasurementModel,
    ci_fuse,
    inflate_noise,
    modular_fusion_update,
    optimize_alpha,
)
from .robot import (
    BearingErrorModel,
    BearingGeometry,
    BearingMeasurement,
    JointEstimate,
    LandmarkEstimate,
    MethodVariant,
    PoseMeasurement,
    RobotEstimate,
    RobotPose,
    Twist,
    TwistNoise,
    bearing_geometry,
    ekf_predict,
    gps_compass_update,
    joint_bearing_update,
    joint_gps_update,
    joint_predict,
    landmark_bearing_update,
    robot_bearing_update,
    true_bearing,
    unicycle_step,
    wrap_angle,
)
from .scenario import (
    DEFAULT_METHODS,
    MethodOutcome,
    MethodStats,
    SampledTrial,
    ScenarioConfig,
    StudySummary,
    TrialRecord,
    run_study,
    sample_scenario,
    simulate_trial,
    summarize_records,
    yaw_controller,
)

__version__ = "0.1.0"

__all__ = [
    "ALPHA_MIN",
    "FusionPolicy",
    "GaussianEstimate",
    "NoisyMeasurement",
    "RelativeMeasurementModel",
    "ci_fuse",
    "inflate_noise",
    "modular_fusion_update",
    "optimize_alpha",
    "BearingErrorModel",
    "BearingGeometry",
    "BearingMeasurement",
    "JointEstimate",
    "LandmarkEstimate",
    "MethodVariant",
    "PoseMeasurement",
    "RobotEstimate",
    "RobotPose",
    "Twist",
    "TwistNoise",
    "bearing_geometry",
    "ekf_predict",
    "gps_compass_update",
    "joint_bearing_update",
    "joint_gps_update",
    "joint_predict",
    "landmark_bearing_update",
    "robot_bearing_update",
    "true_bearing",
    "unicycle_step",
    "wrap_angle",
    "DEFAULT_METHODS",
    "MethodOutcome",
    "MethodStats",
    "SampledTrial",
    "ScenarioConfig",
    "StudySummary",
    "TrialRecord",
    "run_study",
    "sample_scenario",
    "simulate_trial",
    "summarize_records",
    "yaw_controller",
]
