"""Estimation criterion: profiled spectrum, objective value, gradient.

For shifts theta and scales a, the best-fitting common-shape coefficients
have the closed form

    chat_l = (sum_j a_j^2)^{-1} * sum_j a_j e^{i l theta_j} d_{j,l},

where d_{j,l} are per-curve DFT coefficients.  Substituting them back into
the least-squares fit collapses, by discrete orthogonality, to

    value = (1/(nJ)) sum_{j,i} (y_ij - upsilon_j)^2 - sum_l |chat_l|^2,

which is what the fit minimizes.  Under A0 the band is 1 <= |l| <= m and
levels enter only through the first sum; under A1 the l = 0 coefficient
(computed from level-centered data) joins the spectral sum.

The deterministic large-n limit of the criterion (minus the noise floor)
is also provided as an independent test oracle: it is minimized at the
true parameters and has an explicit formula in terms of the true spectrum
and the phase weight sum_j a_j a*_j e^{i x_j} / J.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandTooWide, DegenerateAmplitude
from .fourier import ShapeSpectrum
from .model import ConstraintRegime, CurvePanel, ParameterSet, Regime


@dataclass
class CriterionContext:
    """Immutable per-panel data needed to evaluate the criterion at band m.

    ``d[j, l + m]`` caches the per-curve DFT coefficients for l = -m..m
    (the l = 0 column holds the curve means, used only under A1);
    ``mean_sq`` is (1/(nJ)) sum y^2 and ``ybar`` the per-curve means, which
    together reconstruct the residual term without touching the raw panel.
    """

    panel: CurvePanel
    m: int
    regime: ConstraintRegime = field(default_factory=ConstraintRegime)

    def __post_init__(self):
        n = self.panel.grid.n
        if self.m < 1:
            raise BandTooWide(f"band limit must be >= 1, got {self.m}")
        if 2 * self.m >= n:
            raise BandTooWide(f"band limit {self.m} violates 2*m < n for n={n}")
        blocks = self.panel.curve_dft(self.m)
        self.d = np.vstack([b.coeffs for b in blocks])
        self.ybar = self.panel.y.mean(axis=1)
        self.mean_sq = float((self.panel.y**2).sum()) / (n * self.panel.n_curves)
        self.freqs = np.arange(-self.m, self.m + 1)

    @property
    def n_curves(self) -> int:
        return self.panel.n_curves

    @property
    def n(self) -> int:
        return self.panel.grid.n

    def residual_term(self, upsilon: np.ndarray) -> float:
        """(1/(nJ)) sum_{j,i} (y_ij - upsilon_j)^2 via cached moments."""
        j = self.n_curves
        return self.mean_sq + float(upsilon @ upsilon - 2.0 * (upsilon @ self.ybar)) / j


def _phase_matrix(ctx: CriterionContext, theta: np.ndarray) -> np.ndarray:
    """e^{i l theta_j} for l = -m..m, shaped like ctx.d."""
    return np.exp(1j * np.outer(theta, ctx.freqs))


def profiled_coefficients(ctx: CriterionContext, theta, a) -> ShapeSpectrum:
    """Best-fitting shape coefficients chat_l for fixed shifts and scales.

    Only frequencies 1 <= |l| <= m are filled: on this grid the exponential
    sums at those frequencies kill any constant level, so level centering
    cannot change them.  The l = 0 slot is left at zero; see
    :func:`profiled_mean` for the A1 mean coefficient.
    """
    theta = np.asarray(theta, dtype=float)
    a = np.asarray(a, dtype=float)
    ssq = float(a @ a)
    if ssq < np.finfo(float).tiny:
        raise DegenerateAmplitude("amplitude vector is zero")
    weighted = (a[:, None] * _phase_matrix(ctx, theta) * ctx.d).sum(axis=0) / ssq
    weighted[ctx.m] = 0.0
    return ShapeSpectrum(m=ctx.m, coeffs=weighted)


def profiled_mean(ctx: CriterionContext, a, upsilon) -> float:
    """Mean coefficient chat_0 = sum_j a_j (ybar_j - upsilon_j) / sum_j a_j^2."""
    a = np.asarray(a, dtype=float)
    ssq = float(a @ a)
    if ssq < np.finfo(float).tiny:
        raise DegenerateAmplitude("amplitude vector is zero")
    return float(a @ (ctx.ybar - np.asarray(upsilon, dtype=float))) / ssq


def criterion_value(ctx: CriterionContext, theta, a, upsilon) -> float:
    """Objective value at (theta, a, upsilon) under the context's regime."""
    upsilon = np.asarray(upsilon, dtype=float)
    spec = profiled_coefficients(ctx, theta, a)
    energy = spec.power_ac
    if ctx.regime.kind is Regime.A1:
        energy += profiled_mean(ctx, a, upsilon) ** 2
    return ctx.residual_term(upsilon) - energy


def criterion_gradient(ctx: CriterionContext, theta, a, upsilon) -> np.ndarray:
    """Analytic gradient over the free coordinates.

    Layout matches :func:`model.free_parameter_labels`: shifts 2..J, then
    scales 2..J in the sphere chart a_1 = sqrt(J - sum_{j>=2} a_j^2), then
    the free levels (all J under A0, curves 2..J under A1).
    """
    theta = np.asarray(theta, dtype=float)
    a = np.asarray(a, dtype=float)
    upsilon = np.asarray(upsilon, dtype=float)
    j = ctx.n_curves
    ssq = float(a @ a)
    if ssq < np.finfo(float).tiny:
        raise DegenerateAmplitude("amplitude vector is zero")

    phases = _phase_matrix(ctx, theta)
    weighted = a[:, None] * phases * ctx.d          # row j: a_j e^{il theta_j} d_jl
    chat = weighted.sum(axis=0) / ssq
    chat[ctx.m] = 0.0

    # d|chat_l|^2 / dtheta_k = 2 Re(conj(chat_l) * i l a_k e^{il theta_k} d_kl) / ssq
    il = 1j * ctx.freqs
    denergy_dtheta = 2.0 * np.real((np.conj(chat) * il)[None, :] * weighted).sum(axis=1) / ssq

    # Unconstrained scale derivative; the normalization sum a^2 in chat
    # contributes the -2 a_k * energy term.
    per_curve = phases * ctx.d
    energy_ac = float(np.real(np.vdot(chat, chat)))
    denergy_da = 2.0 * (
        np.real(np.conj(chat)[None, :] * per_curve).sum(axis=1) - 2.0 * a * energy_ac
    ) / ssq

    grad_ups = 2.0 * (upsilon - ctx.ybar) / j

    if ctx.regime.kind is Regime.A1:
        c0 = profiled_mean(ctx, a, upsilon)
        resid = ctx.ybar - upsilon
        # chat_0 depends on both the scales and the levels.
        denergy_da += 2.0 * c0 * (resid - 2.0 * a * c0) / ssq
        grad_ups = grad_ups + 2.0 * c0 * a / ssq
        grad_ups = grad_ups[1:]

    chart = denergy_da[1:] - (a[1:] / a[0]) * denergy_da[0]
    return np.concatenate([-denergy_dtheta[1:], -chart, grad_ups])


def phase_weight(offsets, a, a_star) -> complex:
    """Amplitude-weighted phase average sum_j a_j a*_j e^{i x_j} / J.

    Bounded by 1 in modulus whenever both scale vectors lie on the sphere;
    equality at zero offsets is what pins the criterion's minimum to the
    true shifts.
    """
    offsets = np.asarray(offsets, dtype=float)
    a = np.asarray(a, dtype=float)
    a_star = np.asarray(a_star, dtype=float)
    return complex((a * a_star * np.exp(1j * offsets)).sum() / a.size)


def contrast_oracle(
    beta: ParameterSet,
    truth: ParameterSet,
    true_shape: ShapeSpectrum,
) -> float:
    """Deterministic limit of the criterion minus the noise floor.

    Equals  sum_{l != 0} |c_l|^2 (1 - |phase_weight(l(theta - theta*), a)|^2)
          + (1/J) sum_j (upsilon*_j - upsilon_j)^2,
    truncated to the true band; nonnegative, zero exactly at the truth.
    """
    total = 0.0
    for l in range(1, true_shape.m + 1):
        cl = true_shape.coeff(l)
        if cl == 0:
            continue
        w = phase_weight(l * (beta.theta - truth.theta), beta.a, truth.a)
        total += 2.0 * abs(cl) ** 2 * (1.0 - abs(w) ** 2)
    diff = truth.upsilon - beta.upsilon
    return total + float(diff @ diff) / truth.n_curves
