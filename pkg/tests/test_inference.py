"""Information blocks, the alternative-regime covariance, and intervals."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

import shapealign as sa
from shapealign.errors import (
    ConfigInvalid,
    DegenerateShape,
    EmptySpectrum,
    NotConverged,
    ZeroAmplitudeCoordinate,
)
from shapealign.model import ConstraintRegime, Regime
from conftest import boxplot_truth, random_hermitian_spectrum, sphere_scales

TONE = sa.ShapeSpectrum.from_onesided({1: 0.5})  # |f|^2 = |f'|^2 = 1/2


def test_two_curve_tone_shift_entry():
    blocks = sa.efficiency_blocks([1.0, 1.0], TONE, sigma=1.0)
    # shift entry of the inverse: (1/|f'|^2) (1/a_2^2 + 1/a_1^2) = 2 * 2 = 4
    assert abs(blocks.h_inv[0, 0] - 4.0) < 1e-12
    assert abs(blocks.h[0, 0] - 0.5 * (1.0 - 0.5)) < 1e-12


def test_identity_residual_random(rng):
    for _ in range(25):
        j = int(rng.integers(2, 6))
        a = sphere_scales(rng, j)
        spec = random_hermitian_spectrum(rng, int(rng.integers(1, 6)))
        blocks = sa.efficiency_blocks(a, spec, sigma=1.3)
        assert blocks.identity_residual() < 1e-10


@pytest.mark.parametrize("j", [2, 3, 5])
def test_closed_form_inverse_matches_numerical(j, rng):
    for _ in range(30):
        a = sphere_scales(rng, j)
        spec = random_hermitian_spectrum(rng, 4)
        blocks = sa.efficiency_blocks(a, spec, sigma=1.0)
        numeric = np.linalg.inv(blocks.h)
        rel = np.linalg.norm(blocks.h_inv - numeric) / np.linalg.norm(numeric)
        assert rel < 1e-8


def test_level_block_is_identity(rng):
    for _ in range(10):
        j = int(rng.integers(2, 6))
        blocks = sa.efficiency_blocks(
            sphere_scales(rng, j), random_hermitian_spectrum(rng, 3), sigma=2.0)
        assert_allclose(blocks.h_inv[2 * (j - 1):, 2 * (j - 1):], np.eye(j), rtol=0, atol=0)
        # cross blocks exactly zero
        assert np.all(blocks.h_inv[: 2 * (j - 1), 2 * (j - 1):] == 0.0)


def test_covariance_scales_with_noise(rng):
    a = sphere_scales(rng, 3)
    spec = random_hermitian_spectrum(rng, 3)
    cov1 = sa.efficiency_blocks(a, spec, sigma=1.0).covariance(100)
    cov2 = sa.efficiency_blocks(a, spec, sigma=2.0).covariance(100)
    assert np.array_equal(cov2, 4.0 * cov1)


def test_plug_in_stability(rng):
    a = sphere_scales(rng, 3)
    spec = random_hermitian_spectrum(rng, 3)
    base = sa.efficiency_blocks(a, spec, sigma=1.0).h_inv
    bump = a + np.array([0.0, 1e-6, -1e-6])
    bump = bump * np.sqrt(3.0 / (bump @ bump))
    moved = sa.efficiency_blocks(bump, spec, sigma=1.0).h_inv
    rel = np.max(np.abs(moved - base)) / np.max(np.abs(base))
    assert rel < 1e-4


def test_efficiency_blocks_guards(rng):
    spec = random_hermitian_spectrum(rng, 2)
    with pytest.raises(ZeroAmplitudeCoordinate):
        sa.efficiency_blocks([np.sqrt(2.0), 0.0], spec, sigma=1.0)
    empty = sa.ShapeSpectrum(m=2, coeffs=np.zeros(5, dtype=complex))
    with pytest.raises(EmptySpectrum):
        sa.efficiency_blocks([1.0, 1.0], empty, sigma=1.0)


def test_a1_reduces_to_reference_family_when_centered(rng):
    a = sphere_scales(rng, 3)
    spec = random_hermitian_spectrum(rng, 3)  # mean-free
    alt = sa.a1_covariance(a, spec, sigma=1.0)
    ref = sa.efficiency_blocks(a, spec, sigma=1.0)
    s = 2
    assert np.all(alt.gamma[s: 2 * s, 2 * s:] == 0.0)
    assert_allclose(alt.gamma[s: 2 * s, s: 2 * s], ref.h_inv[s: 2 * s, s: 2 * s], atol=1e-14)
    assert_allclose(alt.gamma[:s, :s], ref.h_inv[:s, :s], atol=1e-14)


def test_a1_cross_sign_opposes_mean(rng):
    a = sphere_scales(rng, 2)
    for c0 in (1.7, -2.4):
        spec = sa.ShapeSpectrum.from_onesided({1: 0.8, 2: 0.1}, c0=c0)
        alt = sa.a1_covariance(a, spec, sigma=1.0)
        assert np.sign(alt.gamma[1, 2]) == -np.sign(c0)
        assert alt.identity_residual() < 1e-12


def test_a1_two_curve_matrix_against_delta_method():
    # independent assembly from the closed-form estimators themselves:
    # level = mean_2 - a_2 * mean_1 / a_1 couples to the scale estimate
    a = np.array([0.8, np.sqrt(2 - 0.64)])
    c0 = 1.9
    spec = sa.ShapeSpectrum.from_onesided({1: 0.6, 2: 0.25 - 0.1j, 3: 0.1}, c0=c0)
    sigma = 1.0
    alt = sa.a1_covariance(a, spec, sigma)

    p_ac = spec.power_ac
    dp = spec.derivative_power
    var_theta = (1 / a[1] ** 2 + 1 / a[0] ** 2) / dp
    b_inv = 1 + a[1] ** 2 / a[0] ** 2
    var_a = (a[0] ** 2 / 2) / p_ac                      # B / p_ac with B = a_1^2/2
    var_u = b_inv * (1 + c0**2 / p_ac)                  # level + mean propagation
    cov_au = -c0 * b_inv * var_a                        # = -c0 / p_ac
    expected = np.array([
        [var_theta, 0.0, 0.0],
        [0.0, var_a, cov_au],
        [0.0, cov_au, var_u],
    ])
    assert_allclose(alt.gamma, expected, rtol=1e-12)


def test_a1_degenerate_shape():
    flat = sa.ShapeSpectrum(m=1, coeffs=np.array([0.0, 3.0, 0.0], dtype=complex))
    with pytest.raises(DegenerateShape):
        sa.a1_covariance([1.0, 1.0], flat, sigma=1.0)


def _tone_fit(n=400, sigma=1.0):
    """Converged fit whose plug-in shift variance entry is exactly 4/n."""
    params = sa.ParameterSet(theta=[0.0, 1.0], a=[1.0, 1.0], upsilon=[0.0, 0.0], sigma=sigma)
    return sa.FitResult(
        beta_hat=params, sigma_hat=sigma, shape_hat=TONE, objective=sigma**2,
        iterations=10, restarts=1, converged=True, zero_noise=sigma == 0.0,
        tie_break=False, n=n, m=1,
    )


def test_interval_arithmetic():
    report = sa.confidence_intervals(_tone_fit(), level=0.95)
    theta_iv = report.intervals[0]
    assert theta_iv.name == "theta_2"
    # half width z * sqrt(4/400) = 1.9599... * 0.1
    assert abs(theta_iv.half_width - 0.196) < 1e-3
    assert abs(theta_iv.half_width - sa.inverse_normal_cdf(0.975) * 0.1) < 1e-12
    assert theta_iv.circular


def test_interval_monotone_in_level():
    fit = _tone_fit()
    widths = [
        sa.confidence_intervals(fit, level).intervals[0].half_width
        for level in (0.5, 0.8, 0.9, 0.95, 0.99)
    ]
    assert all(b > a for a, b in zip(widths, widths[1:]))


def test_interval_guards():
    fit = _tone_fit()
    with pytest.raises(ConfigInvalid):
        sa.confidence_intervals(fit, 1.2)
    bad = _tone_fit()
    bad.converged = False
    with pytest.raises(NotConverged):
        sa.confidence_intervals(bad, 0.95)


def test_interval_zero_noise_degenerates():
    fit = _tone_fit(sigma=0.0)
    fit.zero_noise = True
    report = sa.confidence_intervals(fit, 0.95)
    assert report.zero_noise
    for iv in report.intervals:
        assert iv.half_width == 0.0


def test_coverage_of_intervals():
    # 200 seeded replicates of the two-curve benchmark: empirical coverage
    # of the 95% intervals stays within [0.90, 0.99] per parameter
    truth, shape = boxplot_truth()
    grid = sa.make_grid(201)
    truth_free = truth.free_values()
    hits = np.zeros(truth_free.size)
    total = 0
    for r in range(200):
        panel = sa.generate_panel(truth, shape, grid, seed=100 + r)
        result = sa.fit(panel, ConstraintRegime(), sa.FitConfig(m=5))
        if not result.converged:
            continue
        report = sa.confidence_intervals(result, 0.95)
        total += 1
        for k, iv in enumerate(report.intervals):
            target = truth_free[k]
            if iv.circular:
                dist = abs(np.mod(iv.estimate - target + np.pi, 2 * np.pi) - np.pi)
                hits[k] += dist <= iv.half_width
            else:
                hits[k] += iv.lo <= target <= iv.hi
    coverage = hits / total
    assert total >= 190
    assert np.all(coverage >= 0.90)
    assert np.all(coverage <= 0.99)
