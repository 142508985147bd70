"""Closed-form MMD losses and gradients for the Gaussian linear model.

With a Gaussian response kernel of scale ``h_y`` and ``Y | x ~ N(x'theta,
sigma2)`` every expectation in the MMD criterion reduces to a Gaussian
integral. Writing ``s = sigma2 + h_y^2`` and ``t = 2 sigma2 + h_y^2``:

* local loss    ``h_y/sqrt(t) - 2 h_y/sqrt(s) exp(-(y_i - x_i'theta)^2 / (2 s))``
* pairwise loss ``h_y/sqrt(t) exp(-(theta'(x_j - x_i))^2 / (2 t))
  - 2 h_y/sqrt(s) exp(-(y_i - x_j'theta)^2 / (2 s))``

The dataset-level functions are vectorised; the per-observation functions are
kept scalar so tests can enumerate sums by hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ContractViolation, ParameterDomainError
from .kernels import Bandwidths, gaussian_gram

SIGMA2_FLOOR = 1e-8
_EXP_FLOOR = -745.0


def _exp(arg):
    return np.exp(np.maximum(arg, _EXP_FLOOR))


def _check_scales(sigma2, h_y):
    if not sigma2 > 0:
        raise ParameterDomainError(f"sigma2 must be positive, got {sigma2}")
    if not h_y > 0:
        raise ParameterDomainError(f"h_y must be positive, got {h_y}")


@dataclass(frozen=True)
class GaussianLossParams:
    theta: np.ndarray
    sigma2: float
    h_y: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if not np.all(np.isfinite(theta)):
            raise ParameterDomainError("theta must be finite")
        _check_scales(self.sigma2, self.h_y)
        object.__setattr__(self, "theta", theta)


def expected_gaussian_kernel(mu: float, sigma2: float, y0: float, h_y: float) -> float:
    """``E[K_y(Y, y0)]`` for ``Y ~ N(mu, sigma2)`` and a Gaussian ``K_y``."""
    _check_scales(sigma2, h_y)
    s = sigma2 + h_y * h_y
    return h_y / math.sqrt(s) * math.exp(max(-((y0 - mu) ** 2) / (2.0 * s), _EXP_FLOOR))


def _dot(x, theta):
    x = np.asarray(x, dtype=float)
    if x.shape != theta.shape:
        raise ContractViolation(f"x has shape {x.shape}, theta has {theta.shape}")
    return float(x @ theta)


def local_loss_gaussian(params: GaussianLossParams, x_i, y_i: float) -> float:
    s = params.sigma2 + params.h_y**2
    t = 2.0 * params.sigma2 + params.h_y**2
    r = y_i - _dot(x_i, params.theta)
    return params.h_y / math.sqrt(t) - 2.0 * params.h_y / math.sqrt(s) * float(
        _exp(-r * r / (2.0 * s))
    )


def pairwise_loss_gaussian(params: GaussianLossParams, x_i, x_j, y_i: float) -> float:
    s = params.sigma2 + params.h_y**2
    t = 2.0 * params.sigma2 + params.h_y**2
    d = _dot(np.asarray(x_j, dtype=float) - np.asarray(x_i, dtype=float), params.theta)
    r = y_i - _dot(x_j, params.theta)
    term1 = params.h_y / math.sqrt(t) * float(_exp(-d * d / (2.0 * t)))
    term2 = 2.0 * params.h_y / math.sqrt(s) * float(_exp(-r * r / (2.0 * s)))
    return term1 - term2


def local_losses_gaussian(theta, X, y, sigma2: float, h_y: float) -> np.ndarray:
    """Per-observation local losses, shape ``(n,)``."""
    _check_scales(sigma2, h_y)
    s = sigma2 + h_y * h_y
    t = 2.0 * sigma2 + h_y * h_y
    r = y - X @ theta
    return h_y / math.sqrt(t) - 2.0 * h_y / math.sqrt(s) * _exp(-r * r / (2.0 * s))


def _kernel_matrix(data, bw, kx):
    return gaussian_gram(data.X, bw.h_x) if kx is None else kx


def objective_gaussian(
    variant: str,
    theta,
    data: Dataset,
    sigma2: float,
    bw: Bandwidths,
    kx: np.ndarray | None = None,
) -> float:
    """Data-fit part of the penalized criterion (no penalty term).

    ``variant="local"`` averages the local loss over observations;
    ``variant="full"`` is the ``1/n^2`` double sum of the input-kernel
    weighted pairwise loss. ``kx`` lets callers reuse a precomputed input
    Gram matrix.
    """
    data.require("gaussian")
    theta = np.asarray(theta, dtype=float)
    if variant == "local":
        return float(np.mean(local_losses_gaussian(theta, data.X, data.y, sigma2, bw.h_y)))
    if variant != "full":
        raise ContractViolation(f"unknown variant {variant!r}")
    _check_scales(sigma2, bw.h_y)
    h = bw.h_y
    s = sigma2 + h * h
    t = 2.0 * sigma2 + h * h
    z = data.X @ theta
    dz = z[None, :] - z[:, None]  # [i, j] = (x_j - x_i)'theta
    r = data.y[:, None] - z[None, :]  # [i, j] = y_i - x_j'theta
    loss = h / math.sqrt(t) * _exp(-dz * dz / (2.0 * t)) - 2.0 * h / math.sqrt(s) * _exp(
        -r * r / (2.0 * s)
    )
    K = _kernel_matrix(data, bw, kx)
    return float(np.sum(K * loss) / data.n**2)


def grad_local_gaussian(theta, data: Dataset, sigma2: float, h_y: float) -> np.ndarray:
    """Gradient of the local objective in ``theta``."""
    data.require("gaussian")
    _check_scales(sigma2, h_y)
    theta = np.asarray(theta, dtype=float)
    s = sigma2 + h_y * h_y
    r = data.y - data.X @ theta
    w = -2.0 * h_y / s**1.5 * r * _exp(-r * r / (2.0 * s))
    return data.X.T @ w / data.n


def grad_pairwise_gaussian(
    theta, data: Dataset, sigma2: float, bw: Bandwidths, kx: np.ndarray | None = None
) -> np.ndarray:
    """Gradient of the full objective in ``theta``.

    Both per-pair gradients are scalar multiples of ``x_j - x_i`` or ``x_j``,
    so the double sum collapses to row/column sums of an ``n x n`` weight
    matrix followed by two matrix-vector products.
    """
    data.require("gaussian")
    _check_scales(sigma2, bw.h_y)
    theta = np.asarray(theta, dtype=float)
    h = bw.h_y
    s = sigma2 + h * h
    t = 2.0 * sigma2 + h * h
    K = _kernel_matrix(data, bw, kx)
    X = data.X
    z = X @ theta
    dz = z[None, :] - z[:, None]
    r = data.y[:, None] - z[None, :]
    # grad Term1 = a_ij (x_j - x_i); grad Term2 = b_ij x_j
    a = K * (-h / t**1.5) * dz * _exp(-dz * dz / (2.0 * t))
    b = K * (2.0 * h / s**1.5) * r * _exp(-r * r / (2.0 * s))
    coef_j = a.sum(axis=0) - b.sum(axis=0)
    coef_i = -a.sum(axis=1)
    return X.T @ (coef_j + coef_i) / data.n**2


def local_convexity_check_gaussian(theta, x_i, y_i: float, sigma2: float, h_y: float) -> bool:
    """True when the local loss of observation ``i`` has a PSD Hessian."""
    _check_scales(sigma2, h_y)
    r = y_i - _dot(x_i, np.asarray(theta, dtype=float))
    return r * r <= sigma2 + h_y * h_y


def update_sigma2(theta, data: Dataset) -> float:
    """Mean squared residual, floored at ``SIGMA2_FLOOR``."""
    data.require("gaussian")
    r = data.y - data.X @ np.asarray(theta, dtype=float)
    return max(float(np.mean(r * r)), SIGMA2_FLOOR)
