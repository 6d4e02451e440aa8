"""Plug-in asymptotic covariance, standard errors, confidence intervals.

Scaled estimation errors sqrt(n) * (estimate - truth) are asymptotically
Gaussian with covariance sigma^2 * H^{-1}, where the information-style
matrix H is block diagonal over (shifts, scales, levels) under the
reference regime A0.  Both H and its inverse have closed forms in the
scales and two shape norms, so no numerical inversion is needed (the
closed-form inverse is still cross-checked in tests).  Under the
alternative regime A1 the scale and level blocks couple through the
shape's mean; that covariance is assembled by :func:`a1_covariance`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigInvalid,
    ConstraintViolation,
    DegenerateShape,
    EmptySpectrum,
    NotConverged,
    ZeroAmplitudeCoordinate,
)
from .fourier import TWO_PI, ShapeSpectrum
from .model import Regime, free_parameter_labels
from .normal import inverse_normal_cdf

_MIN_AMPLITUDE = 1e-12


def _validate_scales(a: np.ndarray):
    j = a.size
    if j < 2:
        raise ConstraintViolation("need at least two curves")
    if abs(float(a @ a) - j) > 1e-8:
        raise ConstraintViolation("scales must lie on the sphere sum a^2 = J")
    if np.min(np.abs(a)) < _MIN_AMPLITUDE:
        raise ZeroAmplitudeCoordinate("every scale must be nonzero")


@dataclass
class EfficiencyBlocks:
    """Closed-form information matrix H and inverse under regime A0.

    Block order matches the free coordinates: shifts 2..J, scales 2..J,
    levels 1..J; cross blocks are exactly zero.  The estimator covariance
    at sample size n is sigma^2 * H^{-1} / n.
    """

    h: np.ndarray
    h_inv: np.ndarray
    shape_power: float        # sum_{1<=|l|<=m} |c_l|^2
    derivative_power: float   # sum l^2 |c_l|^2
    a: np.ndarray
    sigma: float

    @property
    def n_curves(self) -> int:
        return self.a.size

    def covariance(self, n: int) -> np.ndarray:
        return self.sigma**2 * self.h_inv / n

    def identity_residual(self) -> float:
        eye = np.eye(self.h.shape[0])
        return float(np.max(np.abs(self.h @ self.h_inv - eye)))


def efficiency_blocks(a, shape: ShapeSpectrum, sigma: float) -> EfficiencyBlocks:
    """Assemble H and its closed-form inverse from plug-in quantities.

    Raises
    ------
    ZeroAmplitudeCoordinate
        If any scale is (numerically) zero.
    EmptySpectrum
        If the shape has no energy away from frequency zero.
    """
    a = np.asarray(a, dtype=float)
    _validate_scales(a)
    f2 = shape.power_ac
    df2 = shape.derivative_power
    if f2 == 0.0:
        raise EmptySpectrum("shape spectrum has no nonzero coefficients")
    j = a.size
    tail = a[1:]
    tail_sq = tail**2
    eye = np.eye(j - 1)
    ones = np.ones(j - 1)

    h_theta = df2 * (np.diag(tail_sq) - np.outer(tail_sq, tail_sq) / j)
    h_a = f2 * (eye + np.outer(tail, tail) / a[0] ** 2)
    h_inv_theta = (np.diag(1.0 / tail_sq) + np.outer(ones, ones) / a[0] ** 2) / df2
    h_inv_a = (eye - np.outer(tail, tail) / j) / f2

    dim = 3 * j - 2
    h = np.zeros((dim, dim))
    h_inv = np.zeros((dim, dim))
    s = j - 1
    h[:s, :s] = h_theta
    h[s : 2 * s, s : 2 * s] = h_a
    h[2 * s :, 2 * s :] = np.eye(j)
    h_inv[:s, :s] = h_inv_theta
    h_inv[s : 2 * s, s : 2 * s] = h_inv_a
    h_inv[2 * s :, 2 * s :] = np.eye(j)

    return EfficiencyBlocks(
        h=h, h_inv=h_inv, shape_power=f2, derivative_power=df2,
        a=a, sigma=float(sigma),
    )


@dataclass
class A1CovarianceBlocks:
    """Asymptotic covariance under the alternative regime A1.

    Order: shifts 2..J, scales 2..J, levels 2..J.  The scale and level
    blocks couple through the shape mean c0: the cross block is
    -c0 / (|f|^2 - c0^2) times the identity, so the coupling sign is
    opposite to the sign of c0.  Stored without the noise scale; the
    estimator covariance at sample size n is sigma^2 * gamma / n.
    """

    gamma: np.ndarray
    b: np.ndarray
    b_inv: np.ndarray
    c0: float
    a: np.ndarray
    sigma: float

    def covariance(self, n: int) -> np.ndarray:
        return self.sigma**2 * self.gamma / n

    def identity_residual(self) -> float:
        eye = np.eye(self.b.shape[0])
        return float(np.max(np.abs(self.b @ self.b_inv - eye)))


def a1_covariance(a, shape: ShapeSpectrum, sigma: float) -> A1CovarianceBlocks:
    """Assemble the coupled (shift, scale, level) covariance for A1.

    ``shape`` is the uncentered common shape, mean included.

    Raises
    ------
    DegenerateShape
        If the shape is (numerically) constant, |f|^2 - c0^2 ~ 0.
    """
    a = np.asarray(a, dtype=float)
    _validate_scales(a)
    c0 = shape.c0
    p_ac = shape.power_ac          # |f|^2 - c0^2 by Parseval
    total = shape.power_total
    if p_ac <= 1e-12 * max(total, 1e-300):
        raise DegenerateShape("constant shape: |f|^2 - c0^2 is numerically zero")
    df2 = shape.derivative_power
    j = a.size
    tail = a[1:]
    eye = np.eye(j - 1)
    ones = np.ones(j - 1)

    b = eye - np.outer(tail, tail) / j
    b_inv = eye + np.outer(tail, tail) / a[0] ** 2

    dim = 3 * (j - 1)
    gamma = np.zeros((dim, dim))
    s = j - 1
    gamma[:s, :s] = (np.diag(1.0 / tail**2) + np.outer(ones, ones) / a[0] ** 2) / df2
    gamma[s : 2 * s, s : 2 * s] = b / p_ac
    gamma[2 * s :, 2 * s :] = (total / p_ac) * b_inv
    cross = (-c0 / p_ac) * eye
    gamma[s : 2 * s, 2 * s :] = cross
    gamma[2 * s :, s : 2 * s] = cross

    return A1CovarianceBlocks(gamma=gamma, b=b, b_inv=b_inv, c0=c0, a=a, sigma=float(sigma))


@dataclass
class ParameterInterval:
    name: str
    estimate: float
    half_width: float
    lo: float
    hi: float
    circular: bool = False


@dataclass
class ConfidenceReport:
    level: float
    intervals: list[ParameterInterval]
    covariance: np.ndarray  # of the estimates themselves (already / n)
    labels: list[str]
    zero_noise: bool


def confidence_intervals(result, level: float) -> ConfidenceReport:
    """Per-parameter normal confidence intervals from the plug-in covariance.

    Shift intervals are reported on the circle: endpoints are wrapped to
    [0, 2*pi), so ``lo > hi`` means the interval crosses zero.  With a
    zero noise estimate the intervals degenerate to points and the report
    is flagged.

    Raises
    ------
    NotConverged
        If the fit did not converge.
    """
    if not 0.0 < level < 1.0:
        raise ConfigInvalid("confidence level must lie strictly in (0, 1)")
    if not result.converged:
        raise NotConverged("cannot build intervals from an unconverged fit")
    params = result.beta_hat
    j = params.n_curves
    zero_noise = result.sigma_hat == 0.0

    if params.regime.kind is Regime.A0:
        blocks = efficiency_blocks(params.a, result.shape_hat, result.sigma_hat)
        cov = blocks.covariance(result.n) if not zero_noise else np.zeros_like(blocks.h)
    else:
        blocks = a1_covariance(params.a, result.shape_hat, result.sigma_hat)
        cov = blocks.covariance(result.n) if not zero_noise else np.zeros_like(blocks.gamma)

    z = float(inverse_normal_cdf(0.5 * (1.0 + level)))
    estimates = params.free_values()
    labels = free_parameter_labels(j, params.regime)
    intervals = []
    for idx, (name, est) in enumerate(zip(labels, estimates)):
        hw = z * float(np.sqrt(max(cov[idx, idx], 0.0)))
        circular = name.startswith("theta")
        if circular:
            lo, hi = float(np.mod(est - hw, TWO_PI)), float(np.mod(est + hw, TWO_PI))
            if hw >= np.pi:  # interval wraps the whole circle
                lo, hi = 0.0, TWO_PI
        else:
            lo, hi = est - hw, est + hw
        intervals.append(ParameterInterval(name, float(est), hw, lo, hi, circular))

    return ConfidenceReport(
        level=level, intervals=intervals, covariance=cov, labels=labels, zero_noise=zero_noise,
    )
