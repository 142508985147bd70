"""Estimation, selection and prediction measures for fitted coefficients."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractViolation
from .logistic import sigmoid


@dataclass
class EvalReport:
    mse: float
    fp: int
    fn: int
    fsl: int
    pe: float | None = None
    me_percent: float | None = None

    def as_row(self) -> dict:
        return asdict(self)


def _pair(beta_hat, beta_true):
    a = np.asarray(beta_hat, dtype=float)
    b = np.asarray(beta_true, dtype=float)
    if a.shape != b.shape:
        raise ContractViolation(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def estimation_error(beta_hat, beta_true, kind: str = "mean_sq") -> float:
    """Coefficient error.

    ``kind="mean_sq"`` (default) gives ``||b_hat - b||^2 / p``; ``"sq"`` gives
    the squared norm and ``"norm"`` the plain Euclidean norm.
    """
    a, b = _pair(beta_hat, beta_true)
    sq = float(np.sum((a - b) ** 2))
    if kind == "mean_sq":
        return sq / a.size
    if kind == "sq":
        return sq
    if kind == "norm":
        return float(np.sqrt(sq))
    raise ContractViolation(f"unknown estimation error kind {kind!r}")


def selection_loss(beta_hat, beta_true) -> tuple[int, int, int]:
    """``(fp, fn, fp + fn)`` comparing exact-zero patterns."""
    a, b = _pair(beta_hat, beta_true)
    sel = a != 0
    true = b != 0
    fp = int(np.sum(sel & ~true))
    fn = int(np.sum(~sel & true))
    return fp, fn, fp + fn


def prediction_error(beta_hat, X_test, y_test, intercept: float = 0.0) -> float:
    X = np.asarray(X_test, dtype=float)
    y = np.asarray(y_test, dtype=float)
    if y.size < 1:
        raise ContractViolation("empty test set")
    r = y - X @ np.asarray(beta_hat, dtype=float) - intercept
    return float(r @ r / y.size)


def misclassification_error(beta_hat, X_test, y_test, intercept: float = 0.0) -> float:
    """Percentage of test labels missed; predicts 1 only when ``pi > 0.5``."""
    X = np.asarray(X_test, dtype=float)
    y = np.asarray(y_test, dtype=float)
    if y.size < 1:
        raise ContractViolation("empty test set")
    pred = sigmoid(X @ np.asarray(beta_hat, dtype=float) + intercept) > 0.5
    return 100.0 * float(np.mean(pred != (y == 1)))


def evaluate(beta_hat, beta_true, X_test, y_test, family: str, intercept: float = 0.0) -> EvalReport:
    fp, fn, fsl = selection_loss(beta_hat, beta_true)
    report = EvalReport(mse=estimation_error(beta_hat, beta_true), fp=fp, fn=fn, fsl=fsl)
    if family == "gaussian":
        report.pe = prediction_error(beta_hat, X_test, y_test, intercept)
    else:
        report.me_percent = misclassification_error(beta_hat, X_test, y_test, intercept)
    return report
