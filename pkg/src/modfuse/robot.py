"""SE(2) robot / planar landmark estimation with bearing-only coupling.

Unicycle motion model with EKF prediction, full-state GPS/compass update,
the bearing measurement geometry, the two modular bearing fusions in their
rank-one (Sherman-Morrison) form, and the monolithic joint-state baseline.

Angles live in (-pi, pi]; covariances are symmetrized after every update.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .fusion import (
    FusionPolicy,
    RelativeMeasurementModel,
    _validated_cov,
    optimize_alpha,
)
from .linalg import check_finite, ensure_spd, spd_solve, symmetrize

__all__ = [
    "wrap_angle",
    "rotation_matrix",
    "RobotPose",
    "Twist",
    "TwistNoise",
    "RobotEstimate",
    "LandmarkEstimate",
    "PoseMeasurement",
    "BearingMeasurement",
    "JointEstimate",
    "BearingGeometry",
    "MethodVariant",
    "BearingErrorModel",
    "unicycle_step",
    "motion_jacobians",
    "ekf_predict",
    "gps_compass_update",
    "true_bearing",
    "bearing_geometry",
    "landmark_bearing_update",
    "robot_bearing_update",
    "joint_predict",
    "joint_gps_update",
    "joint_bearing_update",
]

_TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return theta - _TWO_PI * np.ceil((theta - np.pi) / _TWO_PI)


def rotation_matrix(theta: float) -> np.ndarray:
    """Planar rotation by theta (counter-clockwise)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class RobotPose:
    """Planar pose: x, y in meters, heading theta in radians, wrapped."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.theta)):
            raise ValueError("non-finite input: pose")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", float(wrap_angle(self.theta)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def rotation(self) -> np.ndarray:
        return rotation_matrix(self.theta)


@dataclass(frozen=True)
class Twist:
    """Forward speed v (m/s) and yaw rate w (rad/s)."""

    v: float
    w: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.v) and np.isfinite(self.w)):
            raise ValueError("non-finite input: twist")


@dataclass(frozen=True)
class TwistNoise:
    """Standard deviations of the speed and yaw-rate measurement errors."""

    sigma_v: float
    sigma_w: float

    def __post_init__(self) -> None:
        if not (self.sigma_v > 0.0 and self.sigma_w > 0.0):
            raise ValueError("twist noise standard deviations must be positive")


@dataclass(frozen=True)
class RobotEstimate:
    """Robot pose estimate with 3x3 SPD covariance (m^2, m^2, rad^2 diagonal)."""

    pose: RobotPose
    cov: np.ndarray

    def __post_init__(self) -> None:
        cov = _validated_cov(self.cov, "robot covariance")
        if cov.shape != (3, 3):
            raise ValueError(f"robot covariance must be 3x3, got {cov.shape}")
        object.__setattr__(self, "cov", cov)

    @property
    def mean(self) -> np.ndarray:
        return self.pose.as_vector


@dataclass(frozen=True)
class LandmarkEstimate:
    """Planar landmark position estimate with 2x2 SPD covariance (m^2)."""

    position: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        position = np.atleast_1d(np.asarray(self.position, dtype=float))
        check_finite(position, "landmark position")
        if position.shape != (2,):
            raise ValueError("landmark position must be a 2-vector")
        cov = _validated_cov(self.cov, "landmark covariance")
        if cov.shape != (2, 2):
            raise ValueError(f"landmark covariance must be 2x2, got {cov.shape}")
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class PoseMeasurement:
    """Full-state GPS/compass measurement of the robot pose."""

    value: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        value = np.atleast_1d(np.asarray(self.value, dtype=float))
        check_finite(value, "pose measurement")
        if value.shape != (3,):
            raise ValueError("pose measurement must be a 3-vector")
        cov = _validated_cov(self.cov, "pose measurement covariance")
        if cov.shape != (3, 3):
            raise ValueError("pose measurement covariance must be 3x3")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class BearingMeasurement:
    """Bearing angle to the landmark in the robot body frame, with std dev."""

    angle: float
    sigma: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.angle) and np.isfinite(self.sigma)):
            raise ValueError("non-finite input: bearing measurement")
        if not self.sigma > 0.0:
            raise ValueError("bearing sigma must be positive")
        object.__setattr__(self, "angle", float(wrap_angle(self.angle)))

    @property
    def unit_vector(self) -> np.ndarray:
        return np.array([np.cos(self.angle), np.sin(self.angle)])


@dataclass(frozen=True)
class JointEstimate:
    """Stacked [x_r, y_r, theta_r, x_l, y_l] estimate with 5x5 SPD covariance."""

    state: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        state = np.atleast_1d(np.asarray(self.state, dtype=float))
        check_finite(state, "joint state")
        if state.shape != (5,):
            raise ValueError("joint state must be a 5-vector")
        state = state.copy()
        state[2] = wrap_angle(state[2])
        cov = _validated_cov(self.cov, "joint covariance")
        if cov.shape != (5, 5):
            raise ValueError(f"joint covariance must be 5x5, got {cov.shape}")
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "cov", cov)

    @property
    def robot_pose(self) -> RobotPose:
        return RobotPose(self.state[0], self.state[1], self.state[2])

    @property
    def landmark(self) -> np.ndarray:
        return self.state[3:5]


@dataclass(frozen=True)
class BearingGeometry:
    """Derived bearing-update quantities shared by the modular fusions.

    z is the measured bearing direction (body frame), z_perp its
    perpendicular, z_tilde the world-frame image of z_perp under the
    estimated attitude. u_r couples the robot state to the projected
    residual; gamma_r and gamma_l are the partner-covariance projections
    onto z_tilde (meters).
    """

    z: np.ndarray
    z_perp: np.ndarray
    z_tilde: np.ndarray
    u_r: np.ndarray
    gamma_r: float
    gamma_l: float


class MethodVariant(enum.Enum):
    """The five benchmarked estimators.

    The modular variants cross covariance sharing (full communication ->
    noise inflation) with optimized convex weights (full computation -> CI);
    JOINT is the monolithic 5-state baseline.
    """

    JOINT = "joint"
    FSAFE = "fsafe"
    FKALMAN = "fkalman"
    SAFE = "safe"
    KALMAN = "kalman"

    @property
    def is_joint(self) -> bool:
        return self is MethodVariant.JOINT

    def policy(self) -> FusionPolicy:
        if self is MethodVariant.FSAFE:
            return FusionPolicy(use_ci_weights=True, use_noise_inflation=True)
        if self is MethodVariant.FKALMAN:
            return FusionPolicy(use_ci_weights=False, use_noise_inflation=True)
        if self is MethodVariant.SAFE:
            return FusionPolicy(use_ci_weights=True, use_noise_inflation=False)
        if self is MethodVariant.KALMAN:
            return FusionPolicy(use_ci_weights=False, use_noise_inflation=False)
        raise ValueError("the joint method does not map to a fusion policy")

    @classmethod
    def from_name(cls, name: str) -> "MethodVariant":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown method '{name}' (expected one of: {valid})") from None


def unicycle_step(pose: RobotPose, twist: Twist, tau: float) -> RobotPose:
    """First-order Euler step of the unicycle model."""
    if not (np.isfinite(tau) and tau > 0.0):
        raise ValueError("tau must be positive and finite")
    x = pose.x + tau * np.cos(pose.theta) * twist.v
    y = pose.y + tau * np.sin(pose.theta) * twist.v
    theta = wrap_angle(pose.theta + tau * twist.w)
    return RobotPose(x, y, theta)


def motion_jacobians(theta: float, v_meas: float, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """State and input Jacobians of the Euler unicycle step at (theta, v)."""
    s, c = np.sin(theta), np.cos(theta)
    a = np.array(
        [
            [1.0, 0.0, -tau * s * v_meas],
            [0.0, 1.0, tau * c * v_meas],
            [0.0, 0.0, 1.0],
        ]
    )
    b = np.array([[tau * c, 0.0], [tau * s, 0.0], [0.0, tau]])
    return a, b


def ekf_predict(
    est: RobotEstimate, measured_twist: Twist, noise: TwistNoise, tau: float
) -> RobotEstimate:
    """Propagate the pose estimate with the measured twist; P <- APA^T + BQB^T."""
    pose_next = unicycle_step(est.pose, measured_twist, tau)
    a, b = motion_jacobians(est.pose.theta, measured_twist.v, tau)
    q = np.diag([noise.sigma_v**2, noise.sigma_w**2])
    cov_next = symmetrize(a @ est.cov @ a.T + b @ q @ b.T)
    return RobotEstimate(pose_next, cov_next)


def gps_compass_update(est: RobotEstimate, meas: PoseMeasurement) -> RobotEstimate:
    """Full-state update with gain K = P (P + Sigma)^-1; theta innovation wrapped.

    The posterior covariance (I - K) P is evaluated as Sigma (P + Sigma)^-1 P,
    the algebraically identical product form that stays definite when the
    measurement is far tighter than the prior.
    """
    p, sig = est.cov, meas.cov
    solved = spd_solve(p + sig, p, "innovation covariance")  # (P+Sigma)^-1 P
    gain = solved.T
    innovation = meas.value - est.mean
    innovation[2] = wrap_angle(innovation[2])
    mean_next = est.mean + gain @ innovation
    cov_next = ensure_spd(sig @ solved)
    pose_next = RobotPose(mean_next[0], mean_next[1], wrap_angle(mean_next[2]))
    return RobotEstimate(pose_next, cov_next)


def true_bearing(pose: RobotPose, landmark: np.ndarray) -> float:
    """Bearing angle of the landmark in the robot body frame."""
    landmark = np.asarray(landmark, dtype=float)
    offset = landmark - pose.position
    if np.linalg.norm(offset) <= 1e-9:
        raise ValueError("robot and landmark positions coincide")
    body = pose.rotation().T @ offset
    return float(np.arctan2(body[1], body[0]))


def bearing_geometry(
    z_angle: float, robot: RobotEstimate, lm: LandmarkEstimate
) -> BearingGeometry:
    """Measured-direction frame and partner-covariance projections."""
    z = np.array([np.cos(z_angle), np.sin(z_angle)])
    z_perp = np.array([-np.sin(z_angle), np.cos(z_angle)])
    z_tilde = robot.pose.rotation() @ z_perp
    dx, dy = lm.position - robot.pose.position
    u_r = np.array([[-1.0, 0.0, dy], [0.0, -1.0, -dx]])
    gamma_r = float(np.sqrt(max(z_tilde @ (u_r @ robot.cov @ u_r.T) @ z_tilde, 0.0)))
    gamma_l = float(np.sqrt(max(z_tilde @ lm.cov @ z_tilde, 0.0)))
    return BearingGeometry(z, z_perp, z_tilde, u_r, gamma_r, gamma_l)


def _rank_one_fuse(
    mean: np.ndarray,
    cov: np.ndarray,
    direction: np.ndarray,
    strength: float,
    residual: float,
    alpha: float | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fuse rank-one information (m m^T / s) into (mean, cov).

    alpha None selects unit weights: the plain least-squares rank-one update
    P - (Pm)(Pm)^T / (s + m^T P m) with gain Pm / (s + m^T P m). A convex
    weight alpha < 1 yields the intersection form with denominator
    alpha s / (1 - alpha) + m^T P m and a 1/alpha covariance rescale;
    alpha = 1 keeps the prior untouched.
    """
    u = cov @ direction
    g = float(direction @ u)
    if alpha is None:
        denom = strength + g
        scale = 1.0
    else:
        if alpha >= 1.0:
            return mean.copy(), cov.copy()
        denom = alpha * strength / (1.0 - alpha) + g
        scale = 1.0 / alpha
    mean_next = mean - u * (residual / denom)
    cov_next = ensure_spd(scale * (cov - np.outer(u, u) / denom))
    return mean_next, cov_next


def landmark_bearing_update(
    lm: LandmarkEstimate,
    robot: RobotEstimate,
    meas: BearingMeasurement,
    variant: MethodVariant,
) -> LandmarkEstimate:
    """Modular landmark update from one bearing measurement.

    Information enters only along z_tilde with strength 1 / (sigma^2 +
    gamma_r^2); variants without covariance sharing drop gamma_r, variants
    without the weight optimization use unit weights.
    """
    if variant.is_joint:
        raise ValueError("joint variant does not use the modular landmark update")
    policy = variant.policy()
    geo = bearing_geometry(meas.angle, robot, lm)
    gamma_r = geo.gamma_r if policy.use_noise_inflation else 0.0
    strength = meas.sigma**2 + gamma_r**2
    residual = float(geo.z_tilde @ (lm.position - robot.pose.position))
    alpha = None
    if policy.use_ci_weights:
        alpha = optimize_alpha(lm.cov, np.outer(geo.z_tilde, geo.z_tilde) / strength)
    mean_next, cov_next = _rank_one_fuse(
        lm.position, lm.cov, geo.z_tilde, strength, residual, alpha
    )
    return LandmarkEstimate(mean_next, cov_next)


def robot_bearing_update(
    robot: RobotEstimate,
    lm: LandmarkEstimate,
    meas: BearingMeasurement,
    variant: MethodVariant,
) -> RobotEstimate:
    """Modular robot update from one bearing measurement (mirror of the landmark one)."""
    if variant.is_joint:
        raise ValueError("joint variant does not use the modular robot update")
    policy = variant.policy()
    geo = bearing_geometry(meas.angle, robot, lm)
    gamma_l = geo.gamma_l if policy.use_noise_inflation else 0.0
    strength = meas.sigma**2 + gamma_l**2
    direction = geo.u_r.T @ geo.z_tilde
    residual = float(geo.z_tilde @ (lm.position - robot.pose.position))
    alpha = None
    if policy.use_ci_weights:
        alpha = optimize_alpha(robot.cov, np.outer(direction, direction) / strength)
    mean_next, cov_next = _rank_one_fuse(
        robot.mean, robot.cov, direction, strength, residual, alpha
    )
    pose_next = RobotPose(mean_next[0], mean_next[1], wrap_angle(mean_next[2]))
    return RobotEstimate(pose_next, cov_next)


def joint_predict(
    est: JointEstimate, measured_twist: Twist, noise: TwistNoise, tau: float
) -> JointEstimate:
    """Joint-state prediction: robot block propagates, landmark block is static."""
    pose_next = unicycle_step(est.robot_pose, measured_twist, tau)
    a_r, b_r = motion_jacobians(est.state[2], measured_twist.v, tau)
    a = np.eye(5)
    a[:3, :3] = a_r
    b = np.vstack([b_r, np.zeros((2, 2))])
    q = np.diag([noise.sigma_v**2, noise.sigma_w**2])
    state_next = np.concatenate([pose_next.as_vector, est.landmark])
    cov_next = symmetrize(a @ est.cov @ a.T + b @ q @ b.T)
    return JointEstimate(state_next, cov_next)


def joint_gps_update(est: JointEstimate, meas: PoseMeasurement) -> JointEstimate:
    """EKF update of the joint state from the robot-block measurement."""
    p = est.cov
    innov_cov = p[:3, :3] + meas.cov
    gain = spd_solve(innov_cov, p[:3, :], "innovation covariance").T  # P C^T S^-1
    innovation = meas.value - est.state[:3]
    innovation[2] = wrap_angle(innovation[2])
    state_next = est.state + gain @ innovation
    cov_next = ensure_spd(p - gain @ p[:3, :])
    return JointEstimate(state_next, cov_next)


def joint_bearing_update(est: JointEstimate, meas: BearingMeasurement) -> JointEstimate:
    """Rank-one least-squares update of the joint state from one bearing."""
    dx, dy = est.landmark - est.state[:2]
    z_perp = np.array([-np.sin(meas.angle), np.cos(meas.angle)])
    z_tilde = rotation_matrix(est.state[2]) @ z_perp
    u = np.array(
        [
            [-1.0, 0.0, dy, 1.0, 0.0],
            [0.0, -1.0, -dx, 0.0, 1.0],
        ]
    )
    direction = u.T @ z_tilde
    residual = float(z_tilde @ (est.landmark - est.state[:2]))
    state_next, cov_next = _rank_one_fuse(
        est.state, est.cov, direction, meas.sigma**2, residual, alpha=None
    )
    return JointEstimate(state_next, cov_next)


class BearingErrorModel(RelativeMeasurementModel):
    """Bearing error map between robot pose (slot 1) and landmark (slot 2).

    The measurement vector is the measured bearing direction z (unit
    2-vector); the error is the component of the body-frame landmark offset
    perpendicular to z: (I - z z^T) R(theta)^T (p_l - p_r).
    """

    def error(self, x1: np.ndarray, x2: np.ndarray, z: np.ndarray) -> np.ndarray:
        proj = np.eye(2) - np.outer(z, z)
        rot = rotation_matrix(x1[2])
        return proj @ rot.T @ (x2 - x1[:2])

    def jacobian_x1(self, x1: np.ndarray, x2: np.ndarray, z: np.ndarray) -> np.ndarray:
        proj = np.eye(2) - np.outer(z, z)
        rot = rotation_matrix(x1[2])
        dx, dy = x2 - x1[:2]
        u_r = np.array([[-1.0, 0.0, dy], [0.0, -1.0, -dx]])
        return proj @ rot.T @ u_r

    def jacobian_x2(self, x1: np.ndarray, x2: np.ndarray, z: np.ndarray) -> np.ndarray:
        proj = np.eye(2) - np.outer(z, z)
        rot = rotation_matrix(x1[2])
        return proj @ rot.T
