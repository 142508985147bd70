"""Classical l1-penalized estimators used to start the MMD solver.

``lasso_linear`` runs cyclic coordinate descent (scikit-learn) and
``logistic_lasso`` runs proximal gradient with backtracking. Both operate on
the design exactly as given; :func:`initial_fit` adds column scaling and a
small cross-validation over the penalty.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import Lasso

from .data import Dataset
from .errors import ParameterDomainError
from .gaussian import SIGMA2_FLOOR
from .logistic import sigmoid

logger = logging.getLogger(__name__)

INIT_N_LAMBDAS = 20
INIT_LAMBDA_RATIO = 1e-3
INIT_FOLDS = 5
WINSOR_C = 3.0


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    iterations: int
    converged: bool


def _kkt_violation(beta, corr, lam):
    active = beta != 0
    viol = np.empty_like(beta)
    viol[active] = np.abs(corr[active] - lam * np.sign(beta[active]))
    viol[~active] = np.maximum(np.abs(corr[~active]) - lam, 0.0)
    return float(viol.max()) if viol.size else 0.0


def lasso_linear(
    X, y, lam: float, beta0=None, tol: float = 1e-9, max_sweeps: int = 1_000_000
) -> LassoFit:
    """Minimise ``(1/(2n)) ||y - X b||^2 + lam ||b||_1`` by cyclic coordinate descent.

    The sweeps run in scikit-learn's compiled solver with a duality-gap stop
    far below ``tol``. ``converged`` reports whether the KKT residual
    ``max_j |x_j'r/n - lam sign(b_j)|`` (the subgradient bound for zeros)
    is at most ``tol`` on exit.
    """
    if not lam >= 0:
        raise ParameterDomainError(f"lambda must be nonnegative, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    usable = np.einsum("ij,ij->j", X, X) / n > 1e-14
    if lam == 0 and not usable.all():
        warnings.warn(
            f"{int((~usable).sum())} zero-variance column(s) skipped", RuntimeWarning, stacklevel=2
        )
    beta = np.zeros(p)
    # at lam >= lambda_max the solver can leave rounding-level coefficients
    at_zero = lam >= lambda_max(X, y, "gaussian")
    if usable.any() and not at_zero:
        Xu = np.ascontiguousarray(X[:, usable])
        model = Lasso(
            alpha=lam, fit_intercept=False, tol=1e-14, max_iter=max_sweeps,
            warm_start=beta0 is not None, selection="cyclic",
        )
        if beta0 is not None:
            model.coef_ = np.array(np.asarray(beta0, dtype=float)[usable])
        with warnings.catch_warnings():
            # alpha = 0 and the (deliberately tiny) gap tolerance both warn
            warnings.simplefilter("ignore", UserWarning)
            warnings.simplefilter("ignore", ConvergenceWarning)
            model.fit(Xu, y)
        beta[usable] = model.coef_
        sweeps = int(model.n_iter_)
    else:
        sweeps = 0
    corr = X.T @ (y - X @ beta) / n
    converged = _kkt_violation(beta[usable], corr[usable], lam) <= tol
    return LassoFit(beta, float(lam), sweeps, bool(converged))


def _logistic_nll(z, y):
    # mean of log(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logistic_lasso(
    X, y, lam: float, beta0=None, tol: float = 1e-8, max_iter: int = 20_000
) -> LassoFit:
    """Minimise mean logistic negative log-likelihood plus ``lam ||b||_1``.

    Proximal gradient with a backtracking line search; every accepted step
    decreases the objective. On separable data with ``lam == 0`` the
    coefficients diverge, and the run stops at ``max_iter`` (or once
    ``||b||`` exceeds 1e6) with ``converged=False``.
    """
    if not lam >= 0:
        raise ParameterDomainError(f"lambda must be nonnegative, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    lip = max(np.linalg.norm(X, 2) ** 2 / (4.0 * n), 1e-12)
    step = 1.0 / lip
    z = X @ beta
    f = _logistic_nll(z, y)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = X.T @ (sigmoid(z) - y) / n
        step = min(step * 2.0, 1e3 / lip)
        while True:
            cand = beta - step * grad
            cand = np.sign(cand) * np.maximum(np.abs(cand) - step * lam, 0.0)
            d = cand - beta
            zc = X @ cand
            fc = _logistic_nll(zc, y)
            if fc <= f + grad @ d + (d @ d) / (2.0 * step) + 1e-15 * abs(f):
                break
            step *= 0.5
        beta, z, f = cand, zc, fc
        if math.sqrt(d @ d) / step <= tol:
            converged = True
            break
        if np.linalg.norm(beta) > 1e6:
            break
    return LassoFit(beta, float(lam), it, converged)


def logistic_lasso_objective(X, y, beta, lam: float) -> float:
    return _logistic_nll(np.asarray(X) @ beta, np.asarray(y, float)) + lam * float(
        np.sum(np.abs(beta))
    )


def init_sigma2_from_residuals(beta, X, y) -> float:
    """Mean squared residual of a fit, floored at ``1e-8``."""
    r = np.asarray(y, dtype=float) - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    return max(float(np.mean(r * r)), SIGMA2_FLOOR)


def lambda_max(X, y, family: str) -> float:
    """Smallest penalty at which the no-intercept estimator is exactly zero."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    target = y if family == "gaussian" else y - 0.5
    return float(np.max(np.abs(X.T @ target)) / X.shape[0])


def _column_scale(X):
    s = np.sqrt(np.mean(X * X, axis=0))
    s[s <= 1e-14] = 1.0
    return s


def _fit_scaled(data: Dataset, lam: float, beta0=None) -> LassoFit:
    """Fit on columns scaled to unit root-mean-square; returns raw-scale coefficients."""
    s = _column_scale(data.X)
    Xs = data.X / s
    start = None if beta0 is None else np.asarray(beta0) * s
    if data.family == "gaussian":
        fit = lasso_linear(Xs, data.y, lam, beta0=start)
    else:
        fit = logistic_lasso(Xs, data.y, lam, beta0=start)
    fit.beta = fit.beta / s
    return fit


def _holdout_loss(data: Dataset, beta) -> float:
    z = data.X @ beta
    if data.family == "gaussian":
        return float(np.mean((data.y - z) ** 2))
    return _logistic_nll(z, data.y)


def initializer_grid(data: Dataset, count: int = INIT_N_LAMBDAS, ratio: float = INIT_LAMBDA_RATIO):
    s = _column_scale(data.X)
    hi = lambda_max(data.X / s, data.y, data.family)
    if hi <= 0:
        hi = 1.0
    return np.geomspace(hi, hi * ratio, count)


def select_initializer_lambda(data: Dataset, seed: int = 0, k: int = INIT_FOLDS) -> float:
    """Penalty for the initializer, by k-fold CV on held-out squared error
    (Gaussian) or deviance (binomial). Ties go to the larger penalty."""
    from .model_selection import kfold_split

    grid = initializer_grid(data)
    k = min(k, data.n)
    strat = data.y if data.family == "binomial" else None
    folds = kfold_split(data.n, k, seed, stratify_labels=strat)
    scores = np.zeros(len(grid))
    for fold in folds:
        mask = np.ones(data.n, dtype=bool)
        mask[fold] = False
        train, test = data.subset(np.flatnonzero(mask)), data.subset(fold)
        beta = None
        for g, lam in enumerate(grid):
            fit = _fit_scaled(train, lam, beta0=beta)
            beta = fit.beta
            scores[g] += _holdout_loss(test, beta) / len(folds)
    best = int(np.flatnonzero(scores <= scores.min())[0])
    return float(grid[best])


def initial_fit(data: Dataset, lam: float | None = None, seed: int = 0) -> LassoFit:
    """Initializer fit on the full data; ``lam=None`` selects the penalty by CV."""
    beta = None
    if lam is None:
        lam = select_initializer_lambda(data, seed=seed)
        # walk the grid down to the chosen value, as during CV
        for g in initializer_grid(data):
            if g <= lam:
                break
            beta = _fit_scaled(data, g, beta0=beta).beta
    fit = _fit_scaled(data, lam, beta0=beta)
    logger.debug("initializer lambda=%.4g, %d nonzeros", lam, int(np.sum(fit.beta != 0)))
    return fit


def winsorize(X, c: float = WINSOR_C) -> np.ndarray:
    """Clip each column to ``median +/- c * MAD`` (MAD scaled to the normal SD).

    Columns with zero MAD are left unchanged.
    """
    X = np.asarray(X, dtype=float)
    med = np.median(X, axis=0)
    mad = 1.4826 * np.median(np.abs(X - med), axis=0)
    lo = np.where(mad > 0, med - c * mad, -np.inf)
    hi = np.where(mad > 0, med + c * mad, np.inf)
    return np.clip(X, lo, hi)


def robust_dataset(data: Dataset) -> Dataset:
    """``data`` with winsorized predictors, used for the second solver start."""
    return Dataset(winsorize(data.X), data.y, data.family)
