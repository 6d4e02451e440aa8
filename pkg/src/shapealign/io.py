"""File formats: CSV panels in, canonical JSON results and reports out.

All numbers are serialized with 17 significant digits, which identifies a
double uniquely, so parse -> emit reproduces a tool-written file byte for
byte.  Emission is canonical (fixed key order as built, fixed float
format, fixed layout); non-finite values become null.  Files are written
via a temporary sibling and an atomic rename, so readers never observe a
partial file.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .errors import ConfigInvalid, GridMismatch, ParseError, RaggedColumns
from .fit import FitConfig, FitResult
from .fourier import TWO_PI, ShapeSpectrum, evaluate_spectrum, make_grid
from .inference import ConfidenceReport
from .model import (
    ConstraintRegime,
    CurvePanel,
    Regime,
    center_shape,
    project_to_constraints,
)
from .montecarlo import StudyConfig, StudyReport

_GRID_TOLERANCE = 1e-9


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------

def _render_scalar(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return "null"
        if v == 0.0:
            v = 0.0  # "-0" would re-parse as the integer 0
        return format(v, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _is_scalar(value) -> bool:
    return value is None or isinstance(value, (bool, int, float, str, np.integer, np.floating))


def dumps_canonical(doc) -> str:
    """Serialize to deterministic JSON text (insertion key order)."""
    pieces: list[str] = []

    def emit(value, depth):
        pad = "  " * depth
        if _is_scalar(value):
            pieces.append(_render_scalar(value))
        elif isinstance(value, dict):
            if not value:
                pieces.append("{}")
                return
            pieces.append("{\n")
            for i, (key, item) in enumerate(value.items()):
                pieces.append(f"{pad}  {json.dumps(str(key))}: ")
                emit(item, depth + 1)
                pieces.append(",\n" if i < len(value) - 1 else "\n")
            pieces.append(pad + "}")
        elif isinstance(value, (list, tuple, np.ndarray)):
            items = list(value)
            if not items:
                pieces.append("[]")
                return
            if all(_is_scalar(v) for v in items):
                pieces.append("[" + ", ".join(_render_scalar(v) for v in items) + "]")
                return
            pieces.append("[\n")
            for i, item in enumerate(items):
                pieces.append(pad + "  ")
                emit(item, depth + 1)
                pieces.append(",\n" if i < len(items) - 1 else "\n")
            pieces.append(pad + "]")
        else:
            raise TypeError(f"cannot serialize {type(value).__name__}")

    emit(doc, 0)
    pieces.append("\n")
    return "".join(pieces)


def write_atomic(path: str, text: str):
    """Write-then-rename so no partial file is ever visible."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# panel CSV
# ---------------------------------------------------------------------------

def read_panel(path: str) -> CurvePanel:
    """Parse a curve panel from CSV.

    Header row required.  If the first column is named ``t`` it must hold
    the equidistant grid 2*pi*i/n (radians, within 1e-9); otherwise every
    column is a curve and the grid is implied by the row count.  The row
    count must be odd.
    """
    try:
        # utf-8-sig: tolerate a byte-order mark without corrupting the header
        with open(path, encoding="utf-8-sig", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError("empty file", line=1)

    header = [cell.strip() for cell in rows[0]]
    width = len(header)
    if width < 2:
        raise ParseError("need at least two columns", line=1)
    has_time = header[0] == "t"
    n_curves = width - (1 if has_time else 0)
    if n_curves < 2:
        raise ParseError("need at least two curve columns", line=1)

    data = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            raise ParseError("blank line inside table", line=line_no)
        if len(row) != width:
            raise RaggedColumns(f"line {line_no}: {len(row)} cells, expected {width}")
        values = []
        for col_no, cell in enumerate(row, start=1):
            cell = cell.strip()
            if cell == "":
                raise ParseError("missing cell", line=line_no, column=col_no)
            try:
                values.append(float(cell))
            except ValueError as exc:
                raise ParseError(f"bad number {cell!r}", line=line_no, column=col_no) from exc
        data.append(values)

    n = len(data)
    if n < 3:
        raise GridMismatch(f"need at least 3 rows, got {n}")
    if n % 2 == 0:
        raise GridMismatch("n must be odd")
    table = np.asarray(data, dtype=float)
    grid = make_grid(n)
    if has_time:
        defect = float(np.max(np.abs(table[:, 0] - grid.points)))
        if defect > _GRID_TOLERANCE:
            raise GridMismatch(
                f"time column deviates from the equidistant grid by {defect:.3e}"
            )
        y = table[:, 1:].T
        labels = header[1:]
    else:
        y = table.T
        labels = header
    return CurvePanel(grid=grid, y=y, labels=labels)


def write_panel(path: str, panel: CurvePanel):
    """Emit a panel in the same CSV dialect ``read_panel`` accepts."""
    labels = panel.labels or [f"curve_{k + 1}" for k in range(panel.n_curves)]
    lines = ["t," + ",".join(labels)]
    for i in range(panel.grid.n):
        cells = [format(panel.grid.points[i], ".17g")]
        cells += [format(panel.y[j, i], ".17g") for j in range(panel.n_curves)]
        lines.append(",".join(cells))
    write_atomic(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# result document
# ---------------------------------------------------------------------------

def _shape_entries(spec: ShapeSpectrum) -> list[dict]:
    entries = []
    for l in range(-spec.m, spec.m + 1):
        c = spec.coeff(l)
        if l == 0 and c == 0:
            continue
        entries.append({"l": l, "re": c.real, "im": c.imag})
    return entries


def result_document(
    result: FitResult,
    report: ConfidenceReport | None,
    seed: int | None = None,
    period_days: float | None = None,
) -> dict:
    params = result.beta_hat
    doc = {
        "theta": list(params.theta),
        "a": list(params.a),
        "upsilon": list(params.upsilon),
        "sigma": result.sigma_hat,
        "m": result.m,
        "shape_coeffs": _shape_entries(result.shape_hat),
        "covariance": None,
        "ci": None,
        "diagnostics": {
            "objective": result.objective,
            "iterations": result.iterations,
            "restarts": result.restarts,
            "converged": result.converged,
            "regime": params.regime.kind.value,
            "n": result.n,
            "zero_noise": result.zero_noise,
            "tie_break": result.tie_break,
            "upsilon_max": params.regime.upsilon_max,
            "seed": seed,
        },
    }
    if report is not None:
        doc["covariance"] = {
            "labels": report.labels,
            "matrix": [list(row) for row in report.covariance],
        }
        doc["ci"] = {
            "level": report.level,
            "zero_noise": report.zero_noise,
            "parameters": [
                {
                    "name": iv.name,
                    "estimate": iv.estimate,
                    "half_width": iv.half_width,
                    "lo": iv.lo,
                    "hi": iv.hi,
                    "circular": iv.circular,
                }
                for iv in report.intervals
            ],
        }
    if period_days is not None:
        doc["theta_days"] = [t * period_days / TWO_PI for t in params.theta]
    return doc


def write_shape_table(path: str, spec: ShapeSpectrum, points: int = 512):
    """CSV table (t, shape value) over one period, for external plotting."""
    ts = TWO_PI * np.arange(points) / points
    values = evaluate_spectrum(spec, ts)
    lines = ["t,f_hat"]
    lines += [
        f"{format(t, '.17g')},{format(v, '.17g')}" for t, v in zip(ts, values)
    ]
    write_atomic(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# study config / report documents
# ---------------------------------------------------------------------------

def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigInvalid(f"missing key {key!r} in {context}")
    return mapping[key]


def _parse_shape(node: dict) -> ShapeSpectrum:
    entries = _require(node, "coeffs", "shape")
    if not isinstance(entries, list) or not entries:
        raise ConfigInvalid("shape.coeffs must be a nonempty list")
    m = node.get("m")
    if m is None:
        m = max(abs(int(e.get("l", 0))) for e in entries)
    m = int(m)
    if m < 1:
        raise ConfigInvalid("shape band must be >= 1")
    coeffs = np.zeros(2 * m + 1, dtype=complex)
    seen = set()
    for entry in entries:
        try:
            l = int(entry["l"])
            c = complex(float(entry["re"]), float(entry.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad shape coefficient entry {entry!r}") from exc
        if abs(l) > m:
            raise ConfigInvalid(f"shape frequency {l} outside band {m}")
        if l in seen:
            raise ConfigInvalid(f"duplicate shape frequency {l}")
        seen.add(l)
        coeffs[l + m] = c
    for l in range(1, m + 1):
        has_pos, has_neg = l in seen, -l in seen
        if has_pos and not has_neg:
            coeffs[m - l] = np.conj(coeffs[m + l])
        elif has_neg and not has_pos:
            coeffs[m + l] = np.conj(coeffs[m - l])
    spec = ShapeSpectrum(m=m, coeffs=coeffs)
    if spec.hermitian_defect() > 1e-9 * max(1.0, float(np.abs(coeffs).sum())):
        raise ConfigInvalid("shape coefficients are not conjugate-symmetric")
    if abs(coeffs[m].imag) > 0:
        raise ConfigInvalid("mean coefficient must be real")
    return spec


def parse_study_config(doc: dict) -> StudyConfig:
    """Validate and canonicalize a study configuration document.

    The configured truth may be given in raw generating form (uncentered
    shape, scales off the sphere); it is canonicalized to the identifiable
    representation: the shape mean moves into the levels, the scales are
    rescaled onto the sphere with the shape absorbing the inverse factor,
    and shifts are wrapped.
    """
    if not isinstance(doc, dict):
        raise ConfigInvalid("config root must be a JSON object")
    truth_node = _require(doc, "truth", "config")
    shape = _parse_shape(_require(doc, "shape", "config"))

    theta = np.asarray(_require(truth_node, "theta", "truth"), dtype=float)
    a = np.asarray(_require(truth_node, "a", "truth"), dtype=float)
    upsilon = np.asarray(_require(truth_node, "upsilon", "truth"), dtype=float)
    sigma = float(_require(truth_node, "sigma", "truth"))
    upsilon_max = float(truth_node.get("upsilon_max", 1e6))
    if not (theta.size == a.size == upsilon.size) or theta.size < 2:
        raise ConfigInvalid("truth vectors must share length J >= 2")
    if sigma < 0:
        raise ConfigInvalid("truth sigma must be nonnegative")

    # canonicalize: center the shape, move scales onto the sphere
    centered, c0 = center_shape(shape)
    upsilon = upsilon + a * c0
    j = a.size
    ssq = float(a @ a)
    if ssq <= 0:
        raise ConfigInvalid("truth scales must not all vanish")
    scale = math.sqrt(j / ssq)
    coeffs = centered.coeffs / scale
    regime = ConstraintRegime(kind=Regime.A0, upsilon_max=upsilon_max)
    truth, flipped = project_to_constraints(theta, a * scale, upsilon, regime, sigma=sigma)
    if flipped:
        coeffs = -coeffs
    canonical_shape = ShapeSpectrum(m=centered.m, coeffs=coeffs)

    n_list = _require(doc, "n_list", "config")
    if not isinstance(n_list, list) or not n_list:
        raise ConfigInvalid("n_list must be a nonempty list")
    replicates = int(_require(doc, "replicates", "config"))
    base_seed = int(_require(doc, "base_seed", "config"))

    fit_node = doc.get("fit", {})
    m_value = fit_node.get("m", "auto")
    fit_config = FitConfig(
        m=None if m_value in (None, "auto") else int(m_value),
        m_exponent=float(fit_node.get("m_exponent", 0.25)),
        theta_grid_size=fit_node.get("theta_grid_size"),
        n_multistart=int(fit_node.get("n_multistart", 5)),
        tol_objective=float(fit_node.get("tol_objective", 1e-12)),
        tol_param=float(fit_node.get("tol_param", 1e-9)),
        max_iters=int(fit_node.get("max_iters", 500)),
    )

    regime_names = doc.get("regimes", ["a0"])
    try:
        regimes = tuple(Regime(name) for name in regime_names)
    except ValueError as exc:
        raise ConfigInvalid(f"unknown regime in {regime_names!r}") from exc

    try:
        return StudyConfig(
            truth=truth,
            shape=canonical_shape,
            n_list=tuple(int(n) for n in n_list),
            replicates=replicates,
            base_seed=base_seed,
            fit_config=fit_config,
            regimes=regimes,
        )
    except ConfigInvalid:
        raise
    except Exception as exc:  # constraint violations surface as config errors
        raise ConfigInvalid(str(exc)) from exc


def load_study_config(path: str) -> StudyConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"invalid JSON in {path}: {exc}") from exc
    return parse_study_config(doc)


def report_document(report: StudyReport) -> dict:
    cells = []
    for cell in report.cells:
        cells.append({
            "n": cell.n,
            "regime": cell.regime.value,
            "labels": cell.labels,
            "truth": list(cell.truth_free),
            "bias": list(cell.bias),
            "empirical_covariance": [list(r) for r in cell.empirical_covariance],
            "theory_covariance": [list(r) for r in cell.theory_covariance],
            "ratios": [list(r) for r in cell.ratios],
            "mise": {
                "inband": cell.mise_inband,
                "tail": cell.mise_tail,
                "total": cell.mise_inband + cell.mise_tail,
            },
            "quantiles": {
                "probs": [0.025, 0.25, 0.5, 0.75, 0.975],
                "values": [list(r) for r in cell.quantiles],
            },
            "sigma_mean": cell.sigma_mean,
            "failures": cell.failures,
            "replicates": cell.replicates,
            "invalid": cell.invalid,
        })
    return {
        "n_list": list(report.n_list),
        "replicates": report.replicates,
        "base_seed": report.base_seed,
        "regimes": [r.value for r in report.regimes],
        "cells": cells,
    }
