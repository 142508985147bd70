"""ADMM solver for l1-penalized MMD regression.

The penalty is split off through ``theta = eta``. Each outer iteration runs

1. ``eta <- S(theta + gamma / rho, lam / rho)`` (soft threshold),
2. ``theta <- argmin`` of the smooth part by AdaGrad, started at the
   previous ``theta`` with a fresh accumulator,
3. ``sigma2 <- mean squared residual`` (Gaussian family only),
4. ``gamma <- gamma + rho (theta - eta)``,

and stops once ``||theta - eta|| <= outer_tol`` and
``||rho (eta - eta_prev)|| <= outer_tol``. The reported coefficients are
``eta``, which is exactly sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _compiled, gaussian, logistic
from .data import Dataset
from .errors import ContractViolation, ParameterDomainError, SolverDivergenceError
from .kernels import Bandwidths, gaussian_gram

VARIANTS = ("local", "full")


@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0
    learning_rate: float = 0.1
    inner_max_iter: int = 500
    inner_tol: float = 1e-4
    outer_max_iter: int = 200
    outer_tol: float = 1e-3
    adagrad_epsilon: float = 1e-8

    def __post_init__(self):
        for name in ("rho", "learning_rate", "inner_tol", "outer_tol", "adagrad_epsilon"):
            if not getattr(self, name) > 0:
                raise ParameterDomainError(f"{name} must be positive")
        for name in ("inner_max_iter", "outer_max_iter"):
            if getattr(self, name) < 1:
                raise ParameterDomainError(f"{name} must be at least 1")


@dataclass
class ParamState:
    """ADMM iterate. ``sigma2`` is ``None`` for the binomial family."""

    theta: np.ndarray
    eta: np.ndarray
    gamma: np.ndarray
    sigma2: float | None = None

    def __post_init__(self):
        self.theta = np.array(self.theta, dtype=float)
        self.eta = np.array(self.eta, dtype=float)
        self.gamma = np.array(self.gamma, dtype=float)
        if not (self.theta.shape == self.eta.shape == self.gamma.shape) or self.theta.ndim != 1:
            raise ContractViolation("theta, eta and gamma must be vectors of equal length")

    @classmethod
    def from_coef(cls, coef, sigma2: float | None = None) -> "ParamState":
        coef = np.asarray(coef, dtype=float)
        return cls(coef.copy(), coef.copy(), np.zeros_like(coef), sigma2)

    def copy(self) -> "ParamState":
        return ParamState(self.theta, self.eta, self.gamma, self.sigma2)


@dataclass
class FitResult:
    """Outcome of :func:`admm_fit`.

    ``coef`` is the sparse estimate ``eta`` (without the intercept entry
    when one was fitted).
    """

    state: ParamState
    lam: float
    outer_iters: int
    converged: bool
    primal_residuals: list[float]
    dual_residuals: list[float]
    objective_trace: list[float]
    inner_iters: list[int] = field(default_factory=list)
    fit_intercept: bool = False
    history: list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None

    @property
    def coef(self) -> np.ndarray:
        return self.state.eta[1:] if self.fit_intercept else self.state.eta

    @property
    def intercept(self) -> float:
        return float(self.state.eta[0]) if self.fit_intercept else 0.0

    @property
    def sigma2(self) -> float | None:
        return self.state.sigma2

    @property
    def objective_increases(self) -> int:
        """Outer iterations whose penalized objective rose; expected to be 0
        on convex-region instances, tolerated elsewhere."""
        tr = np.asarray(self.objective_trace)
        return int(np.sum(np.diff(tr) > 1e-12 * np.maximum(1.0, np.abs(tr[:-1]))))


class Problem:
    """A dataset paired with an estimator variant and kernel bandwidths.

    Exposes the smooth data-fit term and its gradient in ``theta`` so the
    solver stays family-agnostic. The input Gram matrix is computed once for
    the full variant. With ``compiled=True`` the local variant runs its
    theta-steps in a compiled loop; the result matches the interpreted loop
    up to floating-point summation order.
    """

    def __init__(
        self,
        data: Dataset,
        variant: str,
        bw: Bandwidths,
        fit_intercept: bool = False,
        compiled: bool = True,
    ):
        if variant not in VARIANTS:
            raise ContractViolation(f"unknown variant {variant!r}")
        if data.n < 1:
            raise ContractViolation("dataset is empty")
        self.data = data
        self.variant = variant
        self.bw = bw
        self.fit_intercept = fit_intercept
        self.compiled = compiled
        self.kx = gaussian_gram(data.X, bw.h_x) if variant == "full" else None
        if fit_intercept:
            X1 = np.hstack([np.ones((data.n, 1)), data.X])
            self._design = Dataset(X1, data.y, data.family)
        else:
            self._design = data

    @property
    def family(self) -> str:
        return self.data.family

    @property
    def dim(self) -> int:
        return self._design.p

    @property
    def penalty_mask(self) -> np.ndarray:
        mask = np.ones(self.dim)
        if self.fit_intercept:
            mask[0] = 0.0
        return mask

    def objective(self, theta, sigma2=None) -> float:
        d = self._design
        if self.family == "gaussian":
            return gaussian.objective_gaussian(self.variant, theta, d, sigma2, self.bw, self.kx)
        return logistic.objective_logistic(self.variant, theta, d, self.bw, self.kx)

    def gradient(self, theta, sigma2=None) -> np.ndarray:
        d = self._design
        if self.family == "gaussian":
            if self.variant == "local":
                return gaussian.grad_local_gaussian(theta, d, sigma2, self.bw.h_y)
            return gaussian.grad_pairwise_gaussian(theta, d, sigma2, self.bw, self.kx)
        if self.variant == "local":
            return logistic.grad_local_logistic(theta, d, self.bw.h_y)
        return logistic.grad_pairwise_logistic(theta, d, self.bw, self.kx)

    def update_sigma2(self, theta) -> float:
        return gaussian.update_sigma2(theta, self._design)

    def with_data(self, data: Dataset) -> "Problem":
        return Problem(data, self.variant, self.bw, self.fit_intercept, self.compiled)

    def theta_step(self, theta, eta, gamma, sigma2, cfg: AdmmConfig):
        """One inexact theta-minimisation; returns ``(theta, inner_iterations)``."""
        if self.compiled and self.variant == "local":
            d = self._design
            th, it, ok = _compiled.theta_step_local(
                self.family, d.X, d.y, self.bw.h_y, sigma2, theta, eta, gamma, cfg
            )
            if not ok:
                raise SolverDivergenceError("non-finite gradient in theta-step", iterate=th)
            return th, int(it)
        return _theta_step(lambda th: self.gradient(th, sigma2), theta, eta, gamma, cfg)


def soft_threshold(a, b):
    """``sign(a) * max(|a| - b, 0)``, element-wise for arrays."""
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ParameterDomainError("threshold must be nonnegative")
    a = np.asarray(a, dtype=float)
    out = np.sign(a) * np.maximum(np.abs(a) - b, 0.0)
    return out if out.ndim else float(out)


def adagrad_step(theta, grad, accumulator, lr: float, eps: float):
    """One AdaGrad update; returns ``(theta', accumulator')``."""
    accumulator = accumulator + grad * grad
    theta = theta - lr * grad / (np.sqrt(accumulator) + eps)
    return theta, accumulator


def _theta_step(loss_grad, theta0, eta, gamma, cfg):
    theta = np.array(theta0, dtype=float)
    acc = np.zeros_like(theta)
    rho, lr, eps = cfg.rho, cfg.learning_rate, cfg.adagrad_epsilon
    tol2 = cfg.inner_tol**2
    for it in range(1, cfg.inner_max_iter + 1):
        g = loss_grad(theta) + gamma + rho * (theta - eta)
        if not np.all(np.isfinite(g)):
            raise SolverDivergenceError("non-finite gradient in theta-step", iterate=theta)
        acc += g * g
        step = lr * g / (np.sqrt(acc) + eps)
        theta -= step
        if step @ step <= tol2:
            break
    return theta, it


def theta_step(
    loss_grad: Callable[[np.ndarray], np.ndarray], theta0, eta, gamma, cfg: AdmmConfig
) -> np.ndarray:
    """Minimise ``loss + gamma'theta + rho/2 ||theta - eta||^2`` by AdaGrad.

    Stops when an update moves ``theta`` by at most ``cfg.inner_tol`` (in
    Euclidean norm) or after ``cfg.inner_max_iter`` updates.

    Raises:
        SolverDivergenceError: if the gradient becomes non-finite; the error
            carries the offending iterate.
    """
    return _theta_step(loss_grad, theta0, np.asarray(eta, float), np.asarray(gamma, float), cfg)[0]


def admm_fit(
    problem: Problem,
    lam: float,
    cfg: AdmmConfig | None = None,
    init: ParamState | None = None,
    record_history: bool = False,
) -> FitResult:
    """Fit the l1-penalized MMD estimator at penalty ``lam``.

    Args:
        problem: data, variant and bandwidths.
        lam: l1 penalty level (applied to the ``1/n`` or ``1/n^2`` scaled loss).
        cfg: solver constants; defaults to :class:`AdmmConfig`.
        init: starting state. Gaussian problems need ``init.sigma2``; when
            ``init`` is ``None`` the fit starts from zero with ``sigma2`` set
            from the zero-coefficient residuals.
        record_history: keep ``(theta, eta, gamma)`` after every outer
            iteration (index 0 holds the starting state).
    """
    cfg = cfg or AdmmConfig()
    if not lam >= 0:
        raise ParameterDomainError(f"lambda must be nonnegative, got {lam}")
    p = problem.dim
    if init is None:
        init = ParamState.from_coef(np.zeros(p))
    if init.theta.shape != (p,):
        raise ContractViolation(f"init has dimension {init.theta.shape[0]}, problem needs {p}")
    gaussian_family = problem.family == "gaussian"
    sigma2 = init.sigma2
    if gaussian_family and sigma2 is None:
        sigma2 = problem.update_sigma2(init.theta)
    if not gaussian_family:
        sigma2 = None

    theta = init.theta.copy()
    eta = init.eta.copy()
    gamma = init.gamma.copy()
    rho = cfg.rho
    thresh = lam / rho * problem.penalty_mask
    weights = lam * problem.penalty_mask

    primal, dual, trace, inner = [], [], [], []
    history = [(theta.copy(), eta.copy(), gamma.copy())] if record_history else None
    converged = False
    k = 0
    for k in range(1, cfg.outer_max_iter + 1):
        eta_prev = eta
        eta = soft_threshold(theta + gamma / rho, thresh)

        theta, n_inner = problem.theta_step(theta, eta, gamma, sigma2, cfg)
        inner.append(n_inner)
        if gaussian_family:
            sigma2 = problem.update_sigma2(theta)
        gamma = gamma + rho * (theta - eta)

        obj = problem.objective(theta, sigma2) + float(weights @ np.abs(eta))
        if not math.isfinite(obj):
            raise SolverDivergenceError("non-finite objective", iterate=theta)
        trace.append(obj)
        r_pri = float(np.linalg.norm(theta - eta))
        r_dual = float(np.linalg.norm(rho * (eta - eta_prev)))
        primal.append(r_pri)
        dual.append(r_dual)
        if record_history:
            history.append((theta.copy(), eta.copy(), gamma.copy()))
        if r_pri <= cfg.outer_tol and r_dual <= cfg.outer_tol:
            converged = True
            break

    state = ParamState(theta, eta, gamma, sigma2)
    return FitResult(
        state=state,
        lam=float(lam),
        outer_iters=k,
        converged=converged,
        primal_residuals=primal,
        dual_residuals=dual,
        objective_trace=trace,
        inner_iters=inner,
        fit_intercept=problem.fit_intercept,
        history=history,
    )
