"""Closed-form MMD losses and gradients for binary logistic regression.

The response kernel is the geometric kernel ``0.5 h (1 - h)^|y - y'|`` so all
expectations are finite sums over ``{0, 1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ContractViolation, ParameterDomainError
from .kernels import Bandwidths, gaussian_gram

_PROB_CLIP = 1e-15


def _check_h(h_y):
    if not 0.0 < h_y < 1.0:
        raise ParameterDomainError(f"h_y must lie in (0, 1), got {h_y}")


def _check_label(y):
    if y not in (0, 1):
        raise ContractViolation(f"label must be 0 or 1, got {y!r}")
    return int(y)


@dataclass(frozen=True)
class LogisticLossParams:
    theta: np.ndarray
    h_y: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if not np.all(np.isfinite(theta)):
            raise ParameterDomainError("theta must be finite")
        _check_h(self.h_y)
        object.__setattr__(self, "theta", theta)


def sigmoid(z):
    """Numerically stable logistic function, scalar or array."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def success_probability(theta, x) -> float:
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != theta.shape:
        raise ContractViolation(f"x has shape {x.shape}, theta has {theta.shape}")
    return sigmoid(float(x @ theta))


def local_loss_logistic(params: LogisticLossParams, x_i, y_i) -> float:
    y = _check_label(y_i)
    pi = min(max(success_probability(params.theta, x_i), _PROB_CLIP), 1.0 - _PROB_CLIP)
    return params.h_y**2 * pi ** (2 * (1 - y)) * (1.0 - pi) ** (2 * y) - 0.5 * params.h_y


def pairwise_loss_logistic(params: LogisticLossParams, x_i, x_j, y_i) -> float:
    y = _check_label(y_i)
    h = params.h_y
    pi = success_probability(params.theta, x_i)
    pj = success_probability(params.theta, x_j)
    term1 = 0.5 * h * (1.0 - h * (pi + pj) + 2.0 * h * pi * pj)
    term2 = h * ((1.0 - h) ** (1 - y) * pj + (1.0 - h) ** y * (1.0 - pj))
    return term1 - term2


def local_losses_logistic(theta, X, y, h_y: float) -> np.ndarray:
    """Per-observation local losses, shape ``(n,)``."""
    _check_h(h_y)
    pi = sigmoid(X @ theta)
    # for y=0 the loss uses pi, for y=1 it uses 1 - pi
    q = np.where(y == 1, 1.0 - pi, pi)
    return h_y**2 * q * q - 0.5 * h_y


def objective_logistic(
    variant: str, theta, data: Dataset, bw: Bandwidths, kx: np.ndarray | None = None
) -> float:
    """Data-fit part of the penalized criterion, same aggregation as the
    Gaussian family: mean local loss, or ``1/n^2`` kernel-weighted double sum.
    """
    data.require("binomial")
    theta = np.asarray(theta, dtype=float)
    if variant == "local":
        return float(np.mean(local_losses_logistic(theta, data.X, data.y, bw.h_y)))
    if variant != "full":
        raise ContractViolation(f"unknown variant {variant!r}")
    h = bw.h_y
    _check_h(h)
    pi = sigmoid(data.X @ theta)
    y = data.y
    term1 = 0.5 * h * (1.0 - h * (pi[:, None] + pi[None, :]) + 2.0 * h * pi[:, None] * pi[None, :])
    a = (1.0 - h) ** (1.0 - y)  # multiplies pi_j
    b = (1.0 - h) ** y  # multiplies 1 - pi_j
    term2 = h * (a[:, None] * pi[None, :] + b[:, None] * (1.0 - pi[None, :]))
    K = gaussian_gram(data.X, bw.h_x) if kx is None else kx
    return float(np.sum(K * (term1 - term2)) / data.n**2)


def grad_local_logistic(theta, data: Dataset, h_y: float) -> np.ndarray:
    """Exact gradient of the mean local loss.

    For ``y_i = 0`` the per-observation gradient is ``2 h^2 pi^2 (1 - pi) x_i``
    and for ``y_i = 1`` it is ``-2 h^2 pi (1 - pi)^2 x_i``.
    """
    data.require("binomial")
    _check_h(h_y)
    pi = sigmoid(data.X @ np.asarray(theta, dtype=float))
    w = np.where(data.y == 0, pi * pi * (1.0 - pi), -pi * (1.0 - pi) ** 2)
    return 2.0 * h_y**2 * (data.X.T @ w) / data.n


def grad_pairwise_logistic(
    theta, data: Dataset, bw: Bandwidths, kx: np.ndarray | None = None
) -> np.ndarray:
    """Gradient of the full objective; uses symmetry of the input Gram matrix."""
    data.require("binomial")
    h = bw.h_y
    _check_h(h)
    K = gaussian_gram(data.X, bw.h_x) if kx is None else kx
    X, y = data.X, data.y
    pi = sigmoid(X @ np.asarray(theta, dtype=float))
    dpi = pi * (1.0 - pi)
    c = 2.0 * pi - 1.0
    kc = K @ c
    # sum_ij K_ij [dpi_i c_j x_i + dpi_j c_i x_j] = 2 X' (dpi * (K c))
    g1 = 0.5 * h * h * 2.0 * (X.T @ (dpi * kc))
    a = (1.0 - h) ** (1.0 - y) - (1.0 - h) ** y
    g2 = h * (X.T @ (dpi * (K.T @ a)))
    return (g1 - g2) / data.n**2


def convexity_region_check_logistic(theta, x_i, y_i) -> bool:
    """True when ``pi_i`` lies in ``[0, 2/3]`` (y=0) or ``[1/3, 1]`` (y=1)."""
    y = _check_label(y_i)
    pi = success_probability(theta, x_i)
    return 1.0 - (2.0 / 3.0) ** y <= pi <= (2.0 / 3.0) ** (1 - y)
