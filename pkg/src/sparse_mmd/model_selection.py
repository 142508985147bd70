"""Penalty grids and K-fold cross-validation for the MMD estimators.

Held-out folds are scored with the family's local MMD loss evaluated at the
fitted sparse coefficients, using the training fold's ``sigma2``. A bounded
loss keeps contaminated validation points from dominating the choice of
penalty. ``scoring="classic"`` switches to squared error (Gaussian) or
misclassification rate (binomial).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .admm import AdmmConfig, FitResult, ParamState, Problem, admm_fit
from .data import Dataset
from .errors import ContractViolation, ParameterDomainError, SolverDivergenceError
from .gaussian import local_losses_gaussian
from .init_lasso import (
    LassoFit,
    _fit_scaled,
    init_sigma2_from_residuals,
    initial_fit,
    lambda_max,
    robust_dataset,
)
from .kernels import Bandwidths, default_bandwidths
from .logistic import local_losses_logistic, sigmoid

logger = logging.getLogger(__name__)

BINOMIAL_GRID = (60, 1e-4, 0.1)
GAUSSIAN_GRID_COUNT = 60
GAUSSIAN_GRID_RATIO = 1e-4


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1 or np.any(v <= 0) or np.any(np.diff(v) >= 0):
            raise ParameterDomainError("grid must be strictly decreasing and positive")
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return self.values.size


@dataclass
class CvResult:
    lambda_best: float
    cv_scores: np.ndarray
    fold_assignments: list[np.ndarray]
    fold_scores: np.ndarray
    flagged: list[tuple[int, int]] = field(default_factory=list)


def lambda_grid(
    family: str,
    count: int | None = None,
    lo: float | None = None,
    hi: float | None = None,
    data: Dataset | None = None,
) -> LambdaGrid:
    """Log-spaced grid from ``hi`` down to ``lo``.

    Binomial defaults are 60 values in ``[1e-4, 0.1]``. Gaussian defaults are
    60 values in ``[1e-4 * lmax, lmax]`` with ``lmax = max_j |X_j'y| / n``,
    which requires ``data``.
    """
    if family == "binomial":
        d_count, d_lo, d_hi = BINOMIAL_GRID
    elif family == "gaussian":
        d_count = GAUSSIAN_GRID_COUNT
        if lo is None or hi is None:
            if data is None:
                raise ContractViolation("Gaussian default grid needs the dataset")
            lmax = lambda_max(data.X, data.y, "gaussian")
            d_hi, d_lo = lmax, lmax * GAUSSIAN_GRID_RATIO
        else:
            d_lo = d_hi = None
    else:
        raise ContractViolation(f"unknown family {family!r}")
    count = d_count if count is None else count
    lo = d_lo if lo is None else lo
    hi = d_hi if hi is None else hi
    if count < 2:
        raise ParameterDomainError("grid needs at least two values")
    if not 0 < lo < hi:
        raise ParameterDomainError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    values = np.geomspace(hi, lo, count)
    values[0], values[-1] = hi, lo
    return LambdaGrid(values)


def kfold_split(n: int, k: int, seed: int, stratify_labels=None) -> list[np.ndarray]:
    """Seeded partition of ``range(n)`` into ``k`` folds.

    Indices are shuffled (per class when ``stratify_labels`` is given) and
    dealt round-robin, so fold sizes and per-fold class counts differ by at
    most one.
    """
    if not 2 <= k <= n:
        raise ParameterDomainError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    if stratify_labels is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(stratify_labels)
        if labels.shape != (n,):
            raise ContractViolation("stratify_labels must have length n")
        order = np.concatenate(
            [rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)]
        )
    return [np.sort(order[f::k]) for f in range(k)]


def initial_state(
    data: Dataset, lasso_lam: float, fit_intercept: bool = False, robust: bool = False
) -> ParamState:
    """Starting ADMM state from the scaled Lasso fit at ``lasso_lam``.

    With ``robust`` the Lasso is fitted to winsorized predictors; the
    coefficients are used as they are on the raw design, and ``sigma2`` comes
    from raw-design residuals.
    """
    beta = _fit_scaled(robust_dataset(data) if robust else data, lasso_lam).beta
    sigma2 = None
    if data.family == "gaussian":
        sigma2 = init_sigma2_from_residuals(beta, data.X, data.y)
    if fit_intercept:
        b0 = float(np.mean(data.y - data.X @ beta)) if data.family == "gaussian" else 0.0
        beta = np.concatenate([[b0], beta])
    return ParamState.from_coef(beta, sigma2)


def holdout_score(problem: Problem, fit: FitResult, test: Dataset, scoring: str = "mmd") -> float:
    coef, b0 = fit.coef, fit.intercept
    z = test.X @ coef + b0
    if scoring == "classic":
        if test.family == "gaussian":
            return float(np.mean((test.y - z) ** 2))
        return float(np.mean((sigmoid(z) > 0.5) != (test.y == 1)))
    if scoring != "mmd":
        raise ContractViolation(f"unknown scoring {scoring!r}")
    if test.family == "gaussian":
        losses = local_losses_gaussian(coef, test.X, test.y - b0, fit.sigma2, problem.bw.h_y)
    else:
        X1 = np.hstack([np.ones((test.n, 1)), test.X])
        losses = local_losses_logistic(np.r_[b0, coef], X1, test.y, problem.bw.h_y)
    return float(np.mean(losses))


def penalized_objective(problem: Problem, fit: FitResult) -> float:
    """Smooth loss plus l1 penalty, both evaluated at the sparse estimate ``eta``."""
    eta = fit.state.eta
    return problem.objective(eta, fit.sigma2) + fit.lam * float(problem.penalty_mask @ np.abs(eta))


def fit_path(
    problem: Problem,
    grid,
    cfg: AdmmConfig | None,
    init: ParamState,
    stop_at: float | None = None,
    restart: ParamState | None = None,
):
    """Warm-started fits along a descending grid; yields ``(index, lam, fit)``.

    With ``restart`` each penalty is also fitted from that fixed state and
    the fit with the lower penalized objective is kept (and warm-starts the
    next penalty). The objective is nonconvex, and a warm start carried down
    from a large penalty can settle in a poor local minimum. A fit that
    diverges yields ``fit=None`` and the path continues from the last good
    state.
    """
    state = init
    for g, lam in enumerate(grid):
        if stop_at is not None and lam < stop_at:
            return
        fits = []
        for start in (state, restart):
            if start is None:
                continue
            try:
                fits.append(admm_fit(problem, lam, cfg, start))
            except SolverDivergenceError as exc:
                logger.warning("fit at lambda=%.4g diverged: %s", lam, exc)
        if not fits:
            yield g, lam, None
            continue
        # first minimum wins, so ties keep the warm-started fit
        fit = min(fits, key=lambda f: penalized_objective(problem, f))
        state = fit.state
        yield g, lam, fit


def cross_validate(
    problem: Problem,
    grid: LambdaGrid,
    cfg: AdmmConfig | None = None,
    k: int = 5,
    seed: int = 0,
    scoring: str = "mmd",
    init_lam: float | None = None,
    restart_lam: float | None = None,
    restart: bool = True,
) -> CvResult:
    """K-fold CV over ``grid``; returns the minimising penalty.

    Each fold starts from the Lasso fit on its training part (at
    ``init_lam``, selected on the whole data when omitted) and walks the grid
    from the largest penalty down with warm starts. With ``restart`` every
    penalty is also fitted from the winsorized-predictor Lasso start (at
    ``restart_lam``); see :func:`fit_path`. Ties go to the larger penalty.
    """
    data = problem.data
    if init_lam is None:
        init_lam = initial_fit(data, seed=seed).lam
    if restart and restart_lam is None:
        restart_lam = initial_fit(robust_dataset(data), seed=seed).lam
    strat = data.y if data.family == "binomial" else None
    folds = kfold_split(data.n, k, seed, stratify_labels=strat)
    scores = np.full((grid.count, k), np.inf)
    flagged = []
    for f, fold in enumerate(folds):
        mask = np.ones(data.n, dtype=bool)
        mask[fold] = False
        train, test = data.subset(np.flatnonzero(mask)), data.subset(fold)
        sub = problem.with_data(train)
        init = initial_state(train, init_lam, problem.fit_intercept)
        alt = initial_state(train, restart_lam, problem.fit_intercept, robust=True) if restart else None
        for g, _, fit in fit_path(sub, grid, cfg, init, restart=alt):
            if fit is None:
                flagged.append((g, f))
                continue
            scores[g, f] = holdout_score(sub, fit, test, scoring)
    cv_scores = scores.mean(axis=1)
    best = int(np.flatnonzero(cv_scores <= cv_scores.min())[0])
    return CvResult(float(grid.values[best]), cv_scores, folds, scores, flagged)


@dataclass
class CvFit:
    """Final fit at the CV penalty, with the CV record and the initializer."""

    fit: FitResult
    cv: CvResult
    init: LassoFit
    bw: Bandwidths
    problem: Problem


def fit_cv(
    data: Dataset,
    variant: str = "local",
    bw: Bandwidths | None = None,
    cfg: AdmmConfig | None = None,
    grid: LambdaGrid | None = None,
    k: int = 5,
    seed: int = 0,
    scoring: str = "mmd",
    fit_intercept: bool = False,
    restart: bool = True,
) -> CvFit:
    """Bandwidths, initializer, CV and final fit in one call.

    The final fit walks the grid on the full data from the initializer down
    to the selected penalty, mirroring how each fold was fitted.
    """
    bw = bw or default_bandwidths(data.X, data.y, data.family)
    problem = Problem(data, variant, bw, fit_intercept)
    init_fit = initial_fit(data, seed=seed)
    restart_lam = initial_fit(robust_dataset(data), seed=seed).lam if restart else None
    grid = grid or lambda_grid(data.family, data=data)
    cv = cross_validate(
        problem, grid, cfg, k=k, seed=seed, scoring=scoring, init_lam=init_fit.lam,
        restart_lam=restart_lam, restart=restart,
    )
    init = initial_state(data, init_fit.lam, fit_intercept)
    alt = initial_state(data, restart_lam, fit_intercept, robust=True) if restart else None
    final = None
    for _, _, fit in fit_path(problem, grid, cfg, init, stop_at=cv.lambda_best, restart=alt):
        if fit is not None:
            final = fit
    if final is None:
        raise SolverDivergenceError("final fit diverged at every penalty")
    return CvFit(final, cv, init_fit, bw, problem)
