"""Randomized scenario generation and the Monte Carlo benchmark harness.

A trial draws a ground-truth robot/landmark placement, noise levels and
initial estimates, simulates the truth plus one shared set of measurement
realizations, and runs every requested estimator on identical data. Trials
are seeded from (study seed, trial index) only, so studies are reproducible
and independent of the degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .robot import (
    BearingMeasurement,
    JointEstimate,
    LandmarkEstimate,
    MethodVariant,
    PoseMeasurement,
    RobotEstimate,
    RobotPose,
    Twist,
    TwistNoise,
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

__all__ = [
    "DEFAULT_METHODS",
    "ScenarioConfig",
    "SampledTrial",
    "MethodOutcome",
    "TrialRecord",
    "MethodStats",
    "StudySummary",
    "sample_scenario",
    "yaw_controller",
    "simulate_trial",
    "run_study",
    "summarize_records",
    "summarize_values",
]

DEFAULT_METHODS = (
    MethodVariant.JOINT,
    MethodVariant.FSAFE,
    MethodVariant.FKALMAN,
    MethodVariant.SAFE,
    MethodVariant.KALMAN,
)

# Bearing updates degenerate when the estimated positions coincide; skip the
# update for that step rather than dividing through near-zero geometry.
_COINCIDENCE_GUARD = 1e-6


@dataclass(frozen=True)
class ScenarioConfig:
    """Full parameterization of the randomized benchmark scenario.

    Defaults reproduce the benchmark setup: a 30 m square arena, T = 100
    Euler steps of 1 s at unit speed, GPS/compass fixes every 3 steps and
    bearings every 6, half-normal per-trial noise levels, and wide initial
    covariances. All distances in meters, angles in radians.
    """

    t_steps: int = 100
    tau: float = 1.0
    gps_period: int = 3
    bearing_period: int = 6
    schedule_phase: int = 0
    speed: float = 1.0
    w0: float = -0.07
    yaw_mix: tuple[float, float] = (0.4, 0.6)
    yaw_innovation_range: tuple[float, float] = (-math.pi / 4, math.pi / 4)
    steer_clamp: float = math.pi / 4
    containment_half_width: float = 15.0
    robot_placement_half_width: float = 13.0
    landmark_placement_half_width: float = 7.5
    estimate_half_width: float = 15.0
    initial_cov_robot: tuple[float, float, float] = (100.0, 400.0, (math.pi / 18) ** 2)
    initial_cov_landmark_scale: float = 9000.0
    # Hyper-variances of the half-normal per-trial noise std draws.
    twist_speed_var: float = 0.25
    twist_yaw_var: float = (math.pi / 90) ** 2
    gps_hyper_var: tuple[float, float, float] = (25.0, 25.0, (7 * math.pi / 180) ** 2)
    bearing_hyper_var: float = (7 * math.pi / 180) ** 2
    # Alternate reading of the GPS noise spec: use the hyper matrix itself as
    # the fixed measurement covariance instead of sampling stds per trial.
    fixed_gps_sigma: bool = False
    # Validation hooks: pin every noise std to one value and/or start the
    # estimates at the truth.
    force_noise_std: float | None = None
    exact_initial_estimates: bool = False
    methods: tuple[MethodVariant, ...] = DEFAULT_METHODS
    seed: int = 0
    n_trials: int = 100

    def __post_init__(self) -> None:
        if self.t_steps < 1:
            raise ValueError("t_steps must be >= 1")
        if self.gps_period < 1 or self.bearing_period < 1:
            raise ValueError("measurement periods must be >= 1")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if len(self.methods) == 0:
            raise ValueError("at least one method is required")
        methods = tuple(
            m if isinstance(m, MethodVariant) else MethodVariant.from_name(m)
            for m in self.methods
        )
        object.__setattr__(self, "methods", methods)
        if self.force_noise_std is not None and not self.force_noise_std > 0.0:
            raise ValueError("force_noise_std must be positive")


@dataclass(frozen=True)
class SampledTrial:
    """Per-trial ground truth, initial estimates and noise levels."""

    truth_pose: RobotPose
    landmark: np.ndarray
    robot_est: RobotEstimate
    lm_est: LandmarkEstimate
    sigma_v: float
    sigma_w: float
    sigma_gps: np.ndarray
    sigma_bearing: float


@dataclass(frozen=True)
class MethodOutcome:
    """Terminal metrics of one estimator on one trial."""

    e_l: float
    robot_pos_err: float
    det_pl: float
    nees_l: float
    failed: bool


@dataclass(frozen=True)
class TrialRecord:
    """Per-trial outcomes for every method, plus optional step-by-step trace."""

    trial_index: int
    seed: int
    outcomes: dict[str, MethodOutcome]
    trace: dict | None = field(default=None, compare=False)


@dataclass(frozen=True)
class MethodStats:
    """Distribution summary of terminal landmark errors for one method.

    mean/std include outliers but exclude failed trials; std is the
    population convention (divide by n); quartiles use linear interpolation
    between order statistics.
    """

    n_trials: int
    n_failed: int
    mean: float
    std: float
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    n_outliers: int


@dataclass(frozen=True)
class StudySummary:
    """Per-method statistics over a study."""

    n_trials: int
    seed: int
    methods: dict[str, MethodStats]


def trial_seed(study_seed: int, trial_index: int) -> int:
    """Stable per-trial seed derived from the study seed and trial index."""
    ss = np.random.SeedSequence([int(study_seed), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _trial_rng(study_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(study_seed), int(trial_index)]))


def sample_scenario(rng: np.random.Generator, config: ScenarioConfig) -> SampledTrial:
    """Draw one trial's truth, initial estimates and per-trial noise stds.

    Draw order is fixed (truth placement, truth heading, estimate means,
    then noise levels) so that a given (study seed, trial index) always
    produces the same trial.
    """
    rw = config.robot_placement_half_width
    lw = config.landmark_placement_half_width
    ew = config.estimate_half_width
    p_r = rng.uniform(-rw, rw, size=2)
    p_l = rng.uniform(-lw, lw, size=2)
    theta_r = float(wrap_angle(rng.uniform(0.0, 2.0 * math.pi)))
    est_p_r = rng.uniform(-ew, ew, size=2)
    est_theta_r = float(wrap_angle(rng.uniform(0.0, 2.0 * math.pi)))
    est_p_l = rng.uniform(-ew, ew, size=2)

    sigma_v = abs(rng.normal(0.0, math.sqrt(config.twist_speed_var)))
    sigma_w = abs(rng.normal(0.0, math.sqrt(config.twist_yaw_var)))
    if config.fixed_gps_sigma:
        sigma_gps = np.sqrt(np.asarray(config.gps_hyper_var, dtype=float))
    else:
        sigma_gps = np.abs(rng.normal(0.0, np.sqrt(np.asarray(config.gps_hyper_var))))
    sigma_bearing = abs(rng.normal(0.0, math.sqrt(config.bearing_hyper_var)))

    if config.force_noise_std is not None:
        forced = float(config.force_noise_std)
        sigma_v = sigma_w = sigma_bearing = forced
        sigma_gps = np.full(3, forced)
    if config.exact_initial_estimates:
        est_p_r = p_r.copy()
        est_theta_r = theta_r
        est_p_l = p_l.copy()

    truth_pose = RobotPose(p_r[0], p_r[1], theta_r)
    robot_est = RobotEstimate(
        RobotPose(est_p_r[0], est_p_r[1], est_theta_r),
        np.diag(config.initial_cov_robot),
    )
    lm_est = LandmarkEstimate(est_p_l, config.initial_cov_landmark_scale * np.eye(2))
    return SampledTrial(
        truth_pose, p_l, robot_est, lm_est, sigma_v, sigma_w, sigma_gps, sigma_bearing
    )


def yaw_controller(
    w_prev: float, pose: RobotPose, rng: np.random.Generator, config: ScenarioConfig
) -> float:
    """Smoothed random yaw rate, overridden to steer home near the arena edge.

    Candidate w = mix[0] * w_prev + mix[1] * delta with delta uniform on the
    innovation range. If one Euler step at the configured speed would leave
    the containment square, the override steers the heading toward the
    origin at a clamped rate instead.
    """
    delta = rng.uniform(*config.yaw_innovation_range)
    candidate = config.yaw_mix[0] * w_prev + config.yaw_mix[1] * delta
    half = config.containment_half_width
    next_x = pose.x + config.tau * math.cos(pose.theta) * config.speed
    next_y = pose.y + config.tau * math.sin(pose.theta) * config.speed
    if abs(next_x) > half or abs(next_y) > half:
        heading_err = wrap_angle(math.atan2(-pose.y, -pose.x) - pose.theta)
        return float(np.clip(heading_err / config.tau, -config.steer_clamp, config.steer_clamp))
    return float(candidate)


def _scheduled(step: int, period: int, phase: int) -> bool:
    return step >= 1 and (step - phase) % period == 0


@dataclass
class _TrialData:
    """Shared truth and measurement realizations consumed by every method."""

    truth: np.ndarray  # (T+1, 3) poses
    landmark: np.ndarray
    v_meas: np.ndarray  # (T,)
    w_meas: np.ndarray  # (T,)
    gps: dict[int, np.ndarray]  # step -> measured 3-vector
    bearings: dict[int, float]  # step -> measured angle


def _simulate_truth(sample: SampledTrial, config: ScenarioConfig, rng: np.random.Generator) -> _TrialData:
    t_steps = config.t_steps
    truth = np.zeros((t_steps + 1, 3))
    pose = sample.truth_pose
    truth[0] = pose.as_vector
    v_meas = np.zeros(t_steps)
    w_meas = np.zeros(t_steps)
    gps: dict[int, np.ndarray] = {}
    bearings: dict[int, float] = {}
    w_true = config.w0
    for k in range(t_steps):
        if k > 0:
            w_true = yaw_controller(w_true, pose, rng, config)
        v_meas[k] = config.speed + rng.normal(0.0, sample.sigma_v)
        w_meas[k] = w_true + rng.normal(0.0, sample.sigma_w)
        pose = unicycle_step(pose, Twist(config.speed, w_true), config.tau)
        truth[k + 1] = pose.as_vector
        step = k + 1
        if _scheduled(step, config.gps_period, config.schedule_phase):
            noisy = pose.as_vector + rng.normal(0.0, sample.sigma_gps)
            noisy[2] = wrap_angle(noisy[2])
            gps[step] = noisy
        if _scheduled(step, config.bearing_period, config.schedule_phase):
            angle = true_bearing(pose, sample.landmark)
            bearings[step] = float(wrap_angle(angle + rng.normal(0.0, sample.sigma_bearing)))
    return _TrialData(truth, sample.landmark, v_meas, w_meas, gps, bearings)


def _terminal_metrics(
    lm_mean: np.ndarray, lm_cov: np.ndarray, robot_mean: np.ndarray, data: _TrialData
) -> MethodOutcome:
    err_vec = data.landmark - lm_mean
    e_l = float(np.linalg.norm(err_vec))
    robot_err = float(np.linalg.norm(data.truth[-1, :2] - robot_mean[:2]))
    det_pl = float(np.linalg.det(lm_cov))
    nees = float(err_vec @ np.linalg.solve(lm_cov, err_vec) / 2.0)
    failed = not (
        np.isfinite(e_l) and np.isfinite(robot_err) and np.isfinite(det_pl) and np.isfinite(nees)
    )
    return MethodOutcome(e_l, robot_err, det_pl, nees, failed)


_FAILED = MethodOutcome(math.nan, math.nan, math.nan, math.nan, True)


def _run_modular(
    variant: MethodVariant, sample: SampledTrial, config: ScenarioConfig, data: _TrialData, trace: dict | None
) -> MethodOutcome:
    robot = sample.robot_est
    lm = sample.lm_est
    noise = TwistNoise(sample.sigma_v, sample.sigma_w)
    gps_cov = np.diag(sample.sigma_gps**2)
    if trace is not None:
        trace["robot"][0] = robot.mean
        trace["lm"][0] = lm.position
    for k in range(config.t_steps):
        robot = ekf_predict(robot, Twist(data.v_meas[k], data.w_meas[k]), noise, config.tau)
        step = k + 1
        if step in data.gps:
            robot = gps_compass_update(robot, PoseMeasurement(data.gps[step], gps_cov))
        if step in data.bearings and (
            np.linalg.norm(lm.position - robot.pose.position) >= _COINCIDENCE_GUARD
        ):
            meas = BearingMeasurement(data.bearings[step], sample.sigma_bearing)
            # Both updates consume the same pre-update snapshot of the pair.
            lm_next = landmark_bearing_update(lm, robot, meas, variant)
            robot_next = robot_bearing_update(robot, lm, meas, variant)
            lm, robot = lm_next, robot_next
        if trace is not None:
            trace["robot"][step] = robot.mean
            trace["lm"][step] = lm.position
    return _terminal_metrics(lm.position, lm.cov, robot.mean, data)


def _run_joint(
    sample: SampledTrial, config: ScenarioConfig, data: _TrialData, trace: dict | None
) -> MethodOutcome:
    state0 = np.concatenate([sample.robot_est.mean, sample.lm_est.position])
    cov0 = np.zeros((5, 5))
    cov0[:3, :3] = sample.robot_est.cov
    cov0[3:, 3:] = sample.lm_est.cov
    est = JointEstimate(state0, cov0)
    noise = TwistNoise(sample.sigma_v, sample.sigma_w)
    gps_cov = np.diag(sample.sigma_gps**2)
    if trace is not None:
        trace["robot"][0] = est.state[:3]
        trace["lm"][0] = est.landmark
    for k in range(config.t_steps):
        est = joint_predict(est, Twist(data.v_meas[k], data.w_meas[k]), noise, config.tau)
        step = k + 1
        if step in data.gps:
            est = joint_gps_update(est, PoseMeasurement(data.gps[step], gps_cov))
        if step in data.bearings and (
            np.linalg.norm(est.landmark - est.state[:2]) >= _COINCIDENCE_GUARD
        ):
            est = joint_bearing_update(
                est, BearingMeasurement(data.bearings[step], sample.sigma_bearing)
            )
        if trace is not None:
            trace["robot"][step] = est.state[:3]
            trace["lm"][step] = est.landmark
    return _terminal_metrics(est.landmark, est.cov[3:, 3:], est.state[:3], data)


def simulate_trial(config: ScenarioConfig, trial_index: int, trace: bool = False) -> TrialRecord:
    """Simulate one trial: shared truth and measurements, then every method.

    A method that degenerates numerically (non-finite estimates or a
    covariance that stops being positive definite) is recorded as failed
    rather than aborting the trial.
    """
    rng = _trial_rng(config.seed, trial_index)
    sample = sample_scenario(rng, config)
    data = _simulate_truth(sample, config, rng)

    traces: dict | None = None
    if trace:
        traces = {
            "truth": data.truth,
            "landmark": data.landmark,
            "gps_steps": sorted(data.gps),
            "bearing_steps": sorted(data.bearings),
            "methods": {},
        }
    outcomes: dict[str, MethodOutcome] = {}
    for variant in config.methods:
        method_trace = None
        if traces is not None:
            method_trace = {
                "robot": np.zeros((config.t_steps + 1, 3)),
                "lm": np.zeros((config.t_steps + 1, 2)),
            }
            traces["methods"][variant.value] = method_trace
        try:
            if variant.is_joint:
                outcome = _run_joint(sample, config, data, method_trace)
            else:
                outcome = _run_modular(variant, sample, config, data, method_trace)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            outcome = _FAILED
        outcomes[variant.value] = outcome
    return TrialRecord(trial_index, trial_seed(config.seed, trial_index), outcomes, traces)


def _trial_worker(args: tuple[ScenarioConfig, int]) -> TrialRecord:
    config, index = args
    return simulate_trial(config, index)


def run_study(config: ScenarioConfig, n_workers: int = 1) -> tuple[list[TrialRecord], StudySummary]:
    """Run config.n_trials independent trials and aggregate per-method stats.

    Trials are embarrassingly parallel; results are collected by trial index,
    so the outcome is identical for any worker count.
    """
    jobs = [(config, i) for i in range(config.n_trials)]
    if n_workers <= 1 or config.n_trials == 1:
        records = [simulate_trial(config, i) for i in range(config.n_trials)]
    else:
        chunk = max(1, config.n_trials // (8 * n_workers))
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(_trial_worker, jobs, chunksize=chunk))
    records.sort(key=lambda r: r.trial_index)
    summary = summarize_records(records, config)
    return records, summary


def summarize_values(values: np.ndarray, n_failed: int) -> MethodStats:
    """Distribution statistics of non-failed terminal errors for one method."""
    values = np.asarray(values, dtype=float)
    n_total = values.size + n_failed
    if values.size == 0:
        nan = math.nan
        return MethodStats(n_total, n_failed, nan, nan, nan, nan, nan, nan, nan, nan, 0)
    mean = float(np.mean(values))
    std = float(np.std(values))  # population convention
    q1, median, q3 = (float(q) for q in np.quantile(values, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo = q1 - 1.5 * iqr
    hi = q3 + 1.5 * iqr
    n_outliers = int(np.count_nonzero((values < lo) | (values > hi)))
    return MethodStats(n_total, n_failed, mean, std, median, q1, q3, iqr, lo, hi, n_outliers)


def summarize_records(records: list[TrialRecord], config: ScenarioConfig) -> StudySummary:
    """Aggregate a study's records into per-method statistics."""
    methods: dict[str, MethodStats] = {}
    for variant in config.methods:
        name = variant.value
        values = [r.outcomes[name].e_l for r in records if not r.outcomes[name].failed]
        n_failed = sum(1 for r in records if r.outcomes[name].failed)
        methods[name] = summarize_values(np.asarray(values), n_failed)
    return StudySummary(len(records), config.seed, methods)


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from a JSON-style dict, rejecting unknown keys."""
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config key: {sorted(unknown)[0]}")
    kwargs = dict(raw)
    for name in ("yaw_mix", "yaw_innovation_range", "initial_cov_robot", "gps_hyper_var", "methods"):
        if name in kwargs and isinstance(kwargs[name], list):
            kwargs[name] = tuple(kwargs[name])
    return ScenarioConfig(**kwargs)


def config_to_dict(config: ScenarioConfig) -> dict:
    """JSON-serializable mirror of a ScenarioConfig."""
    out = {}
    for f in fields(ScenarioConfig):
        value = getattr(config, f.name)
        if f.name == "methods":
            value = [m.value for m in value]
        elif isinstance(value, tuple):
            value = list(value)
        out[f.name] = value
    return out
