"""Counterfactual evaluation against the generator's oracle.

MISE integrates the squared gap between a model's dose-response curve and
the oracle's over a uniform dose grid (trapezoidal rule, 65 points by
default) and averages over test units. Factual MSE scores predictions at
the observed (x, s) pairs. dose_curve exports a single unit's curve.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dgp import Oracle
from .errors import EvaluationError, InvalidArgumentError
from .utils import fmt_float

DEFAULT_GRID_SIZE = 65

REPORT_COLUMNS = ["model_id", "dataset_seed", "alpha", "beta", "lambda",
                  "ipm", "k", "mise", "factual_mse", "grid_size",
                  "train_seconds"]


@dataclass
class EvalReport:
    model_id: str
    mise: float
    factual_mse: float
    grid_size: int
    per_unit: list[float] | None = None
    metadata: dict = field(default_factory=dict)


@dataclass
class OracleModel:
    """The generator's own response function exposed as an estimator."""

    oracle: Oracle

    def predict(self, x: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.oracle.response(np.asarray(s, dtype=np.float64).reshape(-1),
                                    np.atleast_2d(np.asarray(x, dtype=np.float64)))


def _trapezoid_weights(grid_size: int) -> np.ndarray:
    if grid_size < 2:
        raise InvalidArgumentError(f"grid_size must be >= 2, got {grid_size}")
    w = np.full(grid_size, 1.0 / (grid_size - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def mise(model, x: np.ndarray, oracle: Oracle,
         grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Mean over units of the trapezoid integral of (mu - mu_hat)^2 over
    `grid_size` equally spaced doses in [0, 1]."""
    return float(np.mean(per_unit_integrated_errors(model, x, oracle, grid_size)))


def per_unit_integrated_errors(model, x: np.ndarray, oracle: Oracle,
                               grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    if oracle is None:
        raise EvaluationError("dataset carries no oracle; MISE needs the "
                              "generator's response weights")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise EvaluationError("no test rows to evaluate")
    weights = _trapezoid_weights(grid_size)
    grid = np.linspace(0.0, 1.0, grid_size)
    n = x.shape[0]
    sq = np.empty((grid_size, n))
    for gi, s in enumerate(grid):
        s_col = np.full(n, s)
        mu = oracle.response(s_col, x)
        mu_hat = model.predict(x, s_col)
        sq[gi] = (mu - mu_hat) ** 2
    # fixed-order reduction: weights @ sq is a deterministic contraction
    return weights @ sq


def factual_mse(model, x: np.ndarray, s: np.ndarray, y: np.ndarray) -> float:
    """MSE between predictions at the observed doses and observed outcomes."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = np.asarray(s, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] == 0:
        raise EvaluationError("no rows to score")
    pred = model.predict(x, s)
    return float(np.mean((pred - y) ** 2))


def dose_curve(model, x_row: np.ndarray, grid_size: int = DEFAULT_GRID_SIZE) -> list[tuple[float, float]]:
    """(s, mu_hat) pairs over a uniform dose grid for one unit."""
    if grid_size < 2:
        raise InvalidArgumentError(f"grid_size must be >= 2, got {grid_size}")
    x_row = np.atleast_2d(np.asarray(x_row, dtype=np.float64))
    if x_row.shape[0] != 1:
        raise InvalidArgumentError("dose_curve takes exactly one unit")
    grid = np.linspace(0.0, 1.0, grid_size)
    x_rep = np.repeat(x_row, grid_size, axis=0)
    pred = model.predict(x_rep, grid)
    return [(float(s), float(p)) for s, p in zip(grid, pred)]


def write_dose_curve(path, curve: list[tuple[float, float]]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "mu_hat"])
        for s, p in curve:
            writer.writerow([fmt_float(s), fmt_float(p)])


def read_dose_curve(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["s", "mu_hat"]:
            raise InvalidArgumentError(f"unexpected dose-curve header: {header}")
        return [(float(row[0]), float(row[1])) for row in reader]


def format_report_rows(rows: list[dict]) -> str:
    """Render report rows to CSV text; floats at 17 significant digits so
    reruns compare byte-for-byte."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        out = []
        for col in REPORT_COLUMNS:
            v = row.get(col, "")
            if isinstance(v, float):
                v = fmt_float(v)
            out.append(v)
        writer.writerow(out)
    return buf.getvalue()


def write_report_csv(path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        fh.write(format_report_rows(rows))
