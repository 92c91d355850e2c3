"""Covariance Intersection and modular least-squares fusion primitives.

Domain-agnostic building blocks: Gaussian estimates, relative measurements
that couple two subsystem states through a nonlinear error map, fusion of
possibly correlated estimates with an optimized convex information weight,
and marginalization of a partner state by inflating the measurement noise
with the partner's projected covariance.

All operations are pure functions of their inputs.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .linalg import check_finite, cholesky_spd, det_batch, spd_inv, symmetrize

__all__ = [
    "ALPHA_MIN",
    "GaussianEstimate",
    "NoisyMeasurement",
    "FusionPolicy",
    "RelativeMeasurementModel",
    "optimize_alpha",
    "ci_fuse",
    "inflate_noise",
    "modular_fusion_update",
]

# Lower clamp for the convex weight: with rank-deficient measurement
# information the fused covariance diverges as alpha -> 0, and the modular
# update formulas divide by alpha.
ALPHA_MIN = 1e-6

_GRID_POINTS = 101
_GOLDEN_WIDTH = 1e-7
_POLISH_WIDTH = 1e-12
_SYM_RTOL = 1e-10
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def _validated_cov(cov: np.ndarray, name: str) -> np.ndarray:
    """Check symmetry to 1e-10 relative, symmetrize, and gate on PD."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got {cov.shape}")
    check_finite(cov, name)
    asym = np.max(np.abs(cov - cov.T))
    if asym > _SYM_RTOL * max(1.0, np.max(np.abs(cov))):
        raise ValueError(f"{name} not symmetric (max asymmetry {asym:.3e})")
    cov = symmetrize(cov)
    cholesky_spd(cov, name)
    return cov


@dataclass(frozen=True)
class GaussianEstimate:
    """Gaussian belief: mean vector plus symmetric positive-definite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        check_finite(mean, "mean")
        cov = _validated_cov(self.cov, "covariance")
        if cov.shape[0] != mean.shape[0]:
            raise ValueError(
                f"mean dimension {mean.shape[0]} != covariance dimension {cov.shape[0]}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class NoisyMeasurement:
    """Measurement vector with symmetric positive-definite noise covariance."""

    value: np.ndarray
    noise_cov: np.ndarray

    def __post_init__(self) -> None:
        value = np.atleast_1d(np.asarray(self.value, dtype=float))
        check_finite(value, "measurement value")
        noise_cov = _validated_cov(self.noise_cov, "noise covariance")
        if noise_cov.shape[0] != value.shape[0]:
            raise ValueError("measurement/noise dimension mismatch")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "noise_cov", noise_cov)


@dataclass(frozen=True)
class FusionPolicy:
    """Knobs for the reduced-communication / reduced-computation variants.

    use_ci_weights: optimize the convex weight alpha (False = unit weights,
        i.e. a standard least-squares fusion that ignores correlation).
    use_noise_inflation: inflate the measurement noise with the partner's
        projected covariance (False = trust the partner's mean as exact,
        which needs no covariance to be communicated).
    """

    use_ci_weights: bool
    use_noise_inflation: bool


class RelativeMeasurementModel(ABC):
    """Error map h(x1, x2, z) that is zero when the measurement is exact.

    The Jacobians are taken with respect to the first and second subsystem
    state at the supplied linearization point.
    """

    @abstractmethod
    def error(self, x1: np.ndarray, x2: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Residual vector, dimension of z."""

    @abstractmethod
    def jacobian_x1(self, x1: np.ndarray, x2: np.ndarray, z: np.ndarray) -> np.ndarray:
        """d error / d x1, shape (p, n1)."""

    @abstractmethod
    def jacobian_x2(self, x1: np.ndarray, x2: np.ndarray, z: np.ndarray) -> np.ndarray:
        """d error / d x2, shape (p, n2)."""


def _neg_logdet_batch(alphas: np.ndarray, prior_info: np.ndarray, info_other: np.ndarray) -> np.ndarray:
    """-logdet(alpha * prior_info + (1 - alpha) * info_other) over an alpha batch."""
    mats = alphas[:, None, None] * prior_info + (1.0 - alphas)[:, None, None] * info_other
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        dets = det_batch(mats)
        return np.where(dets > 0.0, -np.log(dets), np.inf)


def _objective_pair(prior_info: np.ndarray, info_other: np.ndarray):
    """Scalar f(alpha) = -logdet(...) and its derivative, closed forms for n <= 3."""
    n = prior_info.shape[0]
    d = prior_info - info_other  # dM/dalpha

    if n == 1:
        a0, b0 = prior_info[0, 0], info_other[0, 0]
        d0 = d[0, 0]

        def f(al: float) -> float:
            det = al * a0 + (1.0 - al) * b0
            return -math.log(det) if det > 0.0 else math.inf

        def fprime(al: float) -> float:
            det = al * a0 + (1.0 - al) * b0
            return -d0 / det if det > 0.0 else -math.inf

        return f, fprime

    if n == 2:
        a00, a01, a11 = prior_info[0, 0], prior_info[0, 1], prior_info[1, 1]
        b00, b01, b11 = info_other[0, 0], info_other[0, 1], info_other[1, 1]
        d00, d01, d11 = d[0, 0], d[0, 1], d[1, 1]

        def f(al: float) -> float:
            m00 = al * a00 + (1.0 - al) * b00
            m01 = al * a01 + (1.0 - al) * b01
            m11 = al * a11 + (1.0 - al) * b11
            det = m00 * m11 - m01 * m01
            return -math.log(det) if det > 0.0 else math.inf

        def fprime(al: float) -> float:
            m00 = al * a00 + (1.0 - al) * b00
            m01 = al * a01 + (1.0 - al) * b01
            m11 = al * a11 + (1.0 - al) * b11
            det = m00 * m11 - m01 * m01
            ddet = d00 * m11 + m00 * d11 - 2.0 * m01 * d01
            return -ddet / det if det > 0.0 else -math.inf

        return f, fprime

    if n == 3:
        a = [[float(prior_info[i, j]) for j in range(3)] for i in range(3)]
        b = [[float(info_other[i, j]) for j in range(3)] for i in range(3)]
        dd = [[float(d[i, j]) for j in range(3)] for i in range(3)]

        def _dets(al: float) -> tuple[float, float]:
            m00 = al * a[0][0] + (1.0 - al) * b[0][0]
            m01 = al * a[0][1] + (1.0 - al) * b[0][1]
            m02 = al * a[0][2] + (1.0 - al) * b[0][2]
            m11 = al * a[1][1] + (1.0 - al) * b[1][1]
            m12 = al * a[1][2] + (1.0 - al) * b[1][2]
            m22 = al * a[2][2] + (1.0 - al) * b[2][2]
            adj00 = m11 * m22 - m12 * m12
            adj01 = m02 * m12 - m01 * m22
            adj02 = m01 * m12 - m02 * m11
            adj11 = m00 * m22 - m02 * m02
            adj12 = m01 * m02 - m00 * m12
            adj22 = m00 * m11 - m01 * m01
            det = m00 * adj00 + m01 * adj01 + m02 * adj02
            ddet = (
                adj00 * dd[0][0]
                + adj11 * dd[1][1]
                + adj22 * dd[2][2]
                + 2.0 * (adj01 * dd[0][1] + adj02 * dd[0][2] + adj12 * dd[1][2])
            )
            return det, ddet

        def f(al: float) -> float:
            det, _ = _dets(al)
            return -math.log(det) if det > 0.0 else math.inf

        def fprime(al: float) -> float:
            det, ddet = _dets(al)
            return -ddet / det if det > 0.0 else -math.inf

        return f, fprime

    def f_generic(al: float) -> float:
        return float(_neg_logdet_batch(np.array([al]), prior_info, info_other)[0])

    def fprime_generic(al: float) -> float:
        mat = al * prior_info + (1.0 - al) * info_other
        try:
            return -float(np.trace(np.linalg.solve(mat, d)))
        except np.linalg.LinAlgError:
            return -np.inf

    return f_generic, fprime_generic


def optimize_alpha(prior_cov: np.ndarray, info_other: np.ndarray) -> float:
    """Convex weight minimizing the fused covariance determinant.

    Minimizes f(alpha) = -logdet(alpha * P^-1 + (1 - alpha) * info_other)
    over [ALPHA_MIN, 1]: 101-point coarse grid, golden-section refinement to
    width 1e-7, then a derivative-sign bisection polish so that equivalent
    information matrices computed along different algebraic routes resolve
    to the same weight. info_other may be singular (rank-deficient
    measurement information), which is why the lower end is clamped. A flat
    objective ties to alpha = 1: keep the own prior.
    """
    prior_cov = np.atleast_2d(np.asarray(prior_cov, dtype=float))
    info_other = np.atleast_2d(np.asarray(info_other, dtype=float))
    check_finite(prior_cov, "prior covariance")
    check_finite(info_other, "information matrix")
    if prior_cov.shape != info_other.shape:
        raise ValueError("prior covariance / information matrix shape mismatch")
    prior_cov = symmetrize(prior_cov)
    prior_info = spd_inv(prior_cov, "prior covariance")
    info_other = symmetrize(info_other)

    # f is convex along the affine matrix path, and f'(1) = tr(P info) - n,
    # so a non-positive slope at alpha = 1 certifies the boundary minimum.
    # This also resolves flat objectives (identical sources) to alpha = 1.
    n = prior_info.shape[0]
    if float(np.trace(prior_cov @ info_other)) <= n:
        return 1.0

    f_scalar, f_prime = _objective_pair(prior_info, info_other)

    grid = np.linspace(ALPHA_MIN, 1.0, _GRID_POINTS)
    f_grid = _neg_logdet_batch(grid, prior_info, info_other)
    idx = int(np.argmin(f_grid))
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, _GRID_POINTS - 1)]

    # Golden-section refinement of the bracketing interval.
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f_scalar(c), f_scalar(d)
    while hi - lo > _GOLDEN_WIDTH:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f_scalar(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f_scalar(d)

    # Bisection on the analytic derivative sign removes the ~sqrt(eps)
    # argmin jitter inherent to comparing nearly equal f values, so that
    # equivalent information matrices reached along different algebraic
    # routes resolve to the same weight.
    p_lo, p_hi = lo, hi
    if f_prime(p_lo) < 0.0 < f_prime(p_hi):
        while p_hi - p_lo > _POLISH_WIDTH:
            mid = 0.5 * (p_lo + p_hi)
            if f_prime(mid) < 0.0:
                p_lo = mid
            else:
                p_hi = mid
    alpha_c = 0.5 * (p_lo + p_hi)
    f_c = f_scalar(alpha_c)

    f_low_end = float(f_grid[0])
    f_high_end = float(f_grid[-1])
    best = min(f_c, f_low_end, f_high_end)
    tie = 1e-12 * max(1.0, abs(best))
    if f_high_end <= best + tie:
        return 1.0
    if f_c <= f_low_end:
        return float(alpha_c)
    return ALPHA_MIN


def ci_fuse(a: GaussianEstimate, b: GaussianEstimate) -> GaussianEstimate:
    """Fuse two possibly correlated estimates of the same state.

    The fused information matrix is the optimal convex combination
    alpha * Pa^-1 + (1 - alpha) * Pb^-1; the determinant of the result never
    exceeds that of either input. alpha = 1 returns the first estimate
    unchanged (the conservative tie-break).
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")
    pb_inv = spd_inv(b.cov, "covariance")
    alpha = optimize_alpha(a.cov, pb_inv)
    if alpha == 1.0:
        return GaussianEstimate(a.mean, a.cov)
    pa_inv = spd_inv(a.cov, "covariance")
    fused_info = symmetrize(alpha * pa_inv + (1.0 - alpha) * pb_inv)
    fused_cov = symmetrize(spd_inv(fused_info, "fused information"))
    fused_mean = fused_cov @ (alpha * (pa_inv @ a.mean) + (1.0 - alpha) * (pb_inv @ b.mean))
    return GaussianEstimate(fused_mean, fused_cov)


def inflate_noise(
    model: RelativeMeasurementModel,
    own_lin: np.ndarray,
    other: GaussianEstimate,
    meas: NoisyMeasurement,
    which_other: int,
) -> np.ndarray:
    """Measurement noise inflated by the partner's projected covariance.

    Marginalizing the partner state out of the relative-measurement cost
    (to second order) replaces the noise covariance W with
    W + H_other P_other H_other^T, where H_other is the error-map Jacobian
    with respect to the partner state, evaluated at the current estimates.

    which_other selects the argument slot (1 or 2) the partner occupies.
    """
    own_lin = np.atleast_1d(np.asarray(own_lin, dtype=float))
    if which_other == 2:
        jac = model.jacobian_x2(own_lin, other.mean, meas.value)
    elif which_other == 1:
        jac = model.jacobian_x1(other.mean, own_lin, meas.value)
    else:
        raise ValueError(f"which_other must be 1 or 2, got {which_other}")
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    if not np.all(np.isfinite(jac)):
        raise ValueError("non-finite Jacobian entries")
    return symmetrize(meas.noise_cov + jac @ other.cov @ jac.T)


def modular_fusion_update(
    own: GaussianEstimate,
    partner: GaussianEstimate,
    meas: NoisyMeasurement,
    model: RelativeMeasurementModel,
    own_slot: int,
    policy: FusionPolicy,
) -> GaussianEstimate:
    """Update one subsystem from a relative measurement of both.

    The partner's state is marginalized out through noise inflation (when the
    policy allows covariance sharing), the remaining measurement information
    H_own^T W^-1 H_own is fused with the own prior either through the
    optimized convex weight or, with unit weights, as a standard
    least-squares update.
    """
    if own_slot == 1:
        x1, x2 = own.mean, partner.mean
        jac_own = model.jacobian_x1(x1, x2, meas.value)
    elif own_slot == 2:
        x1, x2 = partner.mean, own.mean
        jac_own = model.jacobian_x2(x1, x2, meas.value)
    else:
        raise ValueError(f"own_slot must be 1 or 2, got {own_slot}")
    jac_own = np.atleast_2d(np.asarray(jac_own, dtype=float))
    if not np.all(np.isfinite(jac_own)):
        raise ValueError("non-finite Jacobian entries")

    if policy.use_noise_inflation:
        w_eff = inflate_noise(model, own.mean, partner, meas, which_other=3 - own_slot)
    else:
        w_eff = meas.noise_cov
    w_inv = spd_inv(w_eff, "inflated noise covariance")
    info = symmetrize(jac_own.T @ w_inv @ jac_own)
    residual = np.atleast_1d(np.asarray(model.error(x1, x2, meas.value), dtype=float))

    prior_info = spd_inv(own.cov, "prior covariance")
    if policy.use_ci_weights:
        alpha = optimize_alpha(own.cov, info)
        if alpha == 1.0:
            return GaussianEstimate(own.mean, own.cov)
        fused_info = alpha * prior_info + (1.0 - alpha) * info
        gain_scale = 1.0 - alpha
    else:
        fused_info = prior_info + info
        gain_scale = 1.0
    post_cov = symmetrize(spd_inv(symmetrize(fused_info), "fused information"))
    post_mean = own.mean - gain_scale * (post_cov @ (jac_own.T @ (w_inv @ residual)))
    return GaussianEstimate(post_mean, post_cov)
