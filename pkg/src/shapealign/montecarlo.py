"""Replication studies: consistency, covariance calibration, regime contrast.

Panels are generated from one truth with derived seeds (base seed plus
replicate index), fitted, and aggregated into deterministic summaries:
mean bias, the empirical covariance of sqrt(n)-scaled errors against its
closed-form target, shape-estimator integrated squared error, and
boxplot-style quantiles.  Replicates are independent, so they may run in
parallel; the worker count is capped by the SHAPEALIGN_THREADS environment
variable (unset: serial, 0: one per CPU) and aggregation always follows
replicate order, so parallelism cannot change any result.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid
from .fit import FitConfig, FitResult, fit
from .fourier import ShapeSpectrum, make_grid
from .inference import a1_covariance, efficiency_blocks
from .model import (
    ConstraintRegime,
    ParameterSet,
    Regime,
    free_parameter_labels,
    generate_panel,
    reparameterize_to_a1,
)

_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
_MAX_FAILURE_FRACTION = 0.05


def worker_count() -> int:
    """Parallel replicate cap from SHAPEALIGN_THREADS (unset: 1, 0: auto)."""
    raw = os.environ.get("SHAPEALIGN_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"SHAPEALIGN_THREADS must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ConfigInvalid("SHAPEALIGN_THREADS must be >= 0")
    return os.cpu_count() or 1 if value == 0 else value


def _map_ordered(fn, args_list):
    count = worker_count()
    if count <= 1 or len(args_list) <= 1:
        return [fn(args) for args in args_list]
    with ProcessPoolExecutor(max_workers=count) as pool:
        return list(pool.map(fn, args_list, chunksize=max(1, len(args_list) // (4 * count))))


@dataclass(frozen=True)
class StudyConfig:
    """One replication study: truth, grid sizes, replicate count, seeds."""

    truth: ParameterSet
    shape: ShapeSpectrum
    n_list: tuple[int, ...]
    replicates: int
    base_seed: int
    fit_config: FitConfig = field(default_factory=FitConfig)
    regimes: tuple[Regime, ...] = (Regime.A0,)

    def __post_init__(self):
        if self.replicates < 2:
            raise ConfigInvalid("need at least 2 replicates")
        if not self.n_list:
            raise ConfigInvalid("n_list must not be empty")
        for n in self.n_list:
            if n % 2 == 0 or n < 3:
                raise ConfigInvalid(f"grid sizes must be odd and >= 3, got {n}")
            if 2 * self.shape.m >= n:
                raise ConfigInvalid(f"shape band {self.shape.m} violates 2*m < n for n={n}")
            self.fit_config.resolve_m(n)
        if self.truth.regime.kind is not Regime.A0:
            raise ConfigInvalid("study truth must be given under regime A0")
        if not self.regimes:
            raise ConfigInvalid("at least one regime required")
        self.truth.validate()


def _fit_one(args) -> dict:
    truth, shape, n, seed, regime, fit_config = args
    panel = generate_panel(truth, shape, make_grid(n), seed)
    result = fit(panel, regime, fit_config)
    return _summarize(result)


def _fit_both(args) -> tuple[dict, dict]:
    truth, shape, n, seed, fit_config, upsilon_max = args
    panel = generate_panel(truth, shape, make_grid(n), seed)
    out = []
    for kind in (Regime.A0, Regime.A1):
        regime = ConstraintRegime(kind=kind, upsilon_max=upsilon_max)
        out.append(_summarize(fit(panel, regime, fit_config)))
    return tuple(out)


def _summarize(result: FitResult) -> dict:
    return {
        "free": result.beta_hat.free_values(),
        "converged": bool(result.converged),
        "sigma": result.sigma_hat,
        "shape_coeffs": result.shape_hat.coeffs,
        "m": result.m,
    }


def _circular_errors(free_est, free_truth, n_shift):
    err = np.asarray(free_est, dtype=float) - np.asarray(free_truth, dtype=float)
    wrapped = np.mod(err[:n_shift] + np.pi, 2.0 * np.pi) - np.pi
    wrapped[wrapped == -np.pi] = np.pi  # branch (-pi, pi]
    err[:n_shift] = wrapped
    return err


def _shape_error_sq(est_coeffs: np.ndarray, m_fit: int, true_shape: ShapeSpectrum,
                    include_mean: bool) -> tuple[float, float]:
    """In-band coefficient error and fixed out-of-band truth energy."""
    inband = 0.0
    for l in range(-m_fit, m_fit + 1):
        if l == 0 and not include_mean:
            continue
        inband += abs(est_coeffs[l + m_fit] - true_shape.coeff(l)) ** 2
    tail = 0.0
    for l in range(m_fit + 1, true_shape.m + 1):
        tail += 2.0 * abs(true_shape.coeff(l)) ** 2
    return float(inband), float(tail)


@dataclass
class StudyCell:
    """Aggregates for one (grid size, regime) pair."""

    n: int
    regime: Regime
    labels: list[str]
    truth_free: np.ndarray
    bias: np.ndarray
    empirical_covariance: np.ndarray   # of sqrt(n)-scaled errors
    theory_covariance: np.ndarray      # sigma^2 H^{-1} or sigma^2 Gamma
    ratios: np.ndarray
    mise_inband: float
    mise_tail: float
    quantiles: np.ndarray              # (len(_QUANTILES), n_params) of raw estimates
    sigma_mean: float
    failures: int
    replicates: int
    invalid: bool


@dataclass
class StudyReport:
    n_list: tuple[int, ...]
    replicates: int
    base_seed: int
    regimes: tuple[Regime, ...]
    cells: list[StudyCell]


def _theory_covariance(truth: ParameterSet, shape: ShapeSpectrum, regime: Regime) -> np.ndarray:
    """Covariance target for sqrt(n)-scaled errors; truth/shape already
    expressed under the given regime."""
    if regime is Regime.A0:
        blocks = efficiency_blocks(truth.a, shape, truth.sigma)
        return truth.sigma**2 * blocks.h_inv
    return truth.sigma**2 * a1_covariance(truth.a, shape, truth.sigma).gamma


def run_study(config: StudyConfig) -> StudyReport:
    """Generate, fit, and aggregate; deterministic given the base seed."""
    cells = []
    for n in config.n_list:
        for regime_kind in config.regimes:
            regime = ConstraintRegime(kind=regime_kind, upsilon_max=config.truth.regime.upsilon_max)
            if regime_kind is Regime.A0:
                ref_truth, ref_shape = config.truth, config.shape
            else:
                ref_truth, ref_shape = reparameterize_to_a1(config.truth, config.shape)
            args = [
                (config.truth, config.shape, n, config.base_seed + r, regime, config.fit_config)
                for r in range(config.replicates)
            ]
            summaries = _map_ordered(_fit_one, args)
            cells.append(_aggregate(n, regime_kind, ref_truth, ref_shape, summaries))
    return StudyReport(
        n_list=tuple(config.n_list),
        replicates=config.replicates,
        base_seed=config.base_seed,
        regimes=tuple(config.regimes),
        cells=cells,
    )


def _aggregate(n, regime_kind, ref_truth, ref_shape, summaries) -> StudyCell:
    labels = free_parameter_labels(ref_truth.n_curves, ref_truth.regime)
    truth_free = ref_truth.free_values()
    n_shift = ref_truth.n_curves - 1
    include_mean = regime_kind is Regime.A1

    kept = [s for s in summaries if s["converged"]]
    failures = len(summaries) - len(kept)
    estimates = np.vstack([s["free"] for s in kept]) if kept else np.zeros((0, truth_free.size))
    errors = np.vstack([_circular_errors(row, truth_free, n_shift) for row in estimates]) \
        if kept else estimates
    scaled = np.sqrt(n) * errors

    if len(kept) >= 2:
        emp_cov = np.cov(scaled, rowvar=False, ddof=1)
        emp_cov = np.atleast_2d(emp_cov)
    else:
        emp_cov = np.full((truth_free.size, truth_free.size), np.nan)

    theory = _theory_covariance(ref_truth, ref_shape, regime_kind)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(np.abs(theory) > 1e-12, emp_cov / theory, np.nan)

    inband_vals, tails = [], []
    for s in kept:
        inband, tail = _shape_error_sq(s["shape_coeffs"], s["m"], ref_shape, include_mean)
        inband_vals.append(inband)
        tails.append(tail)
    quantiles = (
        np.quantile(estimates, _QUANTILES, axis=0)
        if kept
        else np.full((len(_QUANTILES), truth_free.size), np.nan)
    )

    return StudyCell(
        n=n,
        regime=regime_kind,
        labels=labels,
        truth_free=truth_free,
        bias=errors.mean(axis=0) if kept else np.full(truth_free.size, np.nan),
        empirical_covariance=emp_cov,
        theory_covariance=theory,
        ratios=ratios,
        mise_inband=float(np.mean(inband_vals)) if inband_vals else float("nan"),
        mise_tail=float(tails[0]) if tails else float("nan"),
        quantiles=quantiles,
        sigma_mean=float(np.mean([s["sigma"] for s in kept])) if kept else float("nan"),
        failures=failures,
        replicates=len(summaries),
        invalid=failures > _MAX_FAILURE_FRACTION * len(summaries),
    )


@dataclass
class MisePoint:
    n: int
    m: int
    inband: float
    tail: float

    @property
    def total(self) -> float:
        return self.inband + self.tail


@dataclass
class MiseCurve:
    points: list[MisePoint]
    slope: float


def mise_curve(
    truth: ParameterSet,
    shape: ShapeSpectrum,
    n_list,
    smoothness: int = 2,
    replicates: int = 50,
    base_seed: int = 0,
    fit_config: FitConfig | None = None,
) -> MiseCurve:
    """Shape-estimator integrated squared error along a grid-size ladder.

    The band follows the rate rule m_n = ceil(n^(1/(2k+1))) for smoothness
    k; the error splits exactly into the in-band coefficient error and the
    out-of-band truth energy (orthogonality), and the reported slope is the
    least-squares fit of log total error against log n.
    """
    if smoothness < 1:
        raise ConfigInvalid("smoothness must be >= 1")
    base = fit_config or FitConfig()
    points = []
    for n in n_list:
        m_n = max(1, int(np.ceil(n ** (1.0 / (2 * smoothness + 1)))))
        cfg = FitConfig(
            m=m_n,
            theta_grid_size=base.theta_grid_size,
            n_multistart=base.n_multistart,
            tol_objective=base.tol_objective,
            tol_param=base.tol_param,
            max_iters=base.max_iters,
        )
        regime = ConstraintRegime(kind=Regime.A0, upsilon_max=truth.regime.upsilon_max)
        args = [
            (truth, shape, n, base_seed + r, regime, cfg)
            for r in range(replicates)
        ]
        summaries = _map_ordered(_fit_one, args)
        kept = [s for s in summaries if s["converged"]]
        pairs = [_shape_error_sq(s["shape_coeffs"], s["m"], shape, False) for s in kept]
        inband = float(np.mean([p[0] for p in pairs]))
        tail = pairs[0][1] if pairs else float("nan")
        points.append(MisePoint(n=n, m=m_n, inband=inband, tail=tail))
    totals = np.array([p.total for p in points])
    ns = np.array([p.n for p in points], dtype=float)
    slope = float(np.polyfit(np.log(ns), np.log(totals), 1)[0]) if len(points) > 1 else float("nan")
    return MiseCurve(points=points, slope=slope)


@dataclass
class RegimeComparison:
    """Same-seed paired fits under both regimes."""

    n: int
    replicates: int
    corr_a0: np.ndarray            # corr(a_j, upsilon_j) per curve j >= 2
    corr_a1: np.ndarray
    corr_a1_theory: np.ndarray     # implied by the coupled covariance
    a1_cov_diag: np.ndarray        # empirical, sqrt(n)-scaled errors
    a1_cov_diag_theory: np.ndarray
    c0: float
    failures: int

    @property
    def a1_sign_consistent(self) -> bool:
        """Empirical couplings carry the sign opposite to the shape mean."""
        if self.c0 == 0.0:
            return True
        return bool(np.all(np.sign(self.corr_a1) == -np.sign(self.c0)))


def compare_regimes(
    truth: ParameterSet,
    shape: ShapeSpectrum,
    n: int,
    replicates: int,
    base_seed: int = 0,
    fit_config: FitConfig | None = None,
) -> RegimeComparison:
    """Fit the same seeded panels under both regimes and compare couplings.

    Under A0 the scale and level estimates are asymptotically independent;
    under A1 they correlate with sign opposite to the rewritten shape's
    mean.  Reports empirical correlations per curve, their theoretical
    counterparts, and the A1 variance diagonal against its target.
    """
    cfg = fit_config or FitConfig()
    truth_a1, shape_a1 = reparameterize_to_a1(truth, shape)
    args = [
        (truth, shape, n, base_seed + r, cfg, truth.regime.upsilon_max)
        for r in range(replicates)
    ]
    results = _map_ordered(_fit_both, args)

    j = truth.n_curves
    rows_a0, rows_a1 = [], []
    failures = 0
    for res_a0, res_a1 in results:
        if res_a0["converged"] and res_a1["converged"]:
            rows_a0.append(res_a0["free"])
            rows_a1.append(res_a1["free"])
        else:
            failures += 1
    if len(rows_a0) < 2:
        raise ConfigInvalid(
            f"only {len(rows_a0)} of {replicates} paired fits converged; "
            "cannot estimate correlations"
        )
    est_a0 = np.vstack(rows_a0)
    est_a1 = np.vstack(rows_a1)

    def _pair_corr(est, a_idx, u_idx):
        c = np.corrcoef(est[:, a_idx], est[:, u_idx])
        return float(c[0, 1])

    # Free layout: theta_2..J | a_2..J | levels (A0: 1..J, A1: 2..J).
    s = j - 1
    corr_a0 = np.array([_pair_corr(est_a0, s + k, 2 * s + 1 + k) for k in range(s)])
    corr_a1 = np.array([_pair_corr(est_a1, s + k, 2 * s + k) for k in range(s)])

    gamma = a1_covariance(truth_a1.a, shape_a1, truth.sigma).gamma
    corr_theory = np.array([
        gamma[s + k, 2 * s + k] / np.sqrt(gamma[s + k, s + k] * gamma[2 * s + k, 2 * s + k])
        for k in range(s)
    ])

    err_a1 = np.vstack([
        _circular_errors(row, truth_a1.free_values(), s) for row in est_a1
    ])
    emp_diag = np.var(np.sqrt(n) * err_a1, axis=0, ddof=1)
    theory_diag = truth.sigma**2 * np.diag(gamma)

    return RegimeComparison(
        n=n,
        replicates=replicates,
        corr_a0=corr_a0,
        corr_a1=corr_a1,
        corr_a1_theory=corr_theory,
        a1_cov_diag=emp_diag,
        a1_cov_diag_theory=theory_diag,
        c0=shape_a1.c0,
        failures=failures,
    )
