"""Compiled AdaGrad theta-step loops for the local (O(n)) objectives.

These mirror :func:`sparse_mmd.admm._theta_step` with the gradient inlined,
which removes per-iteration interpreter overhead. Each returns
``(theta, iterations, ok)``; ``ok`` is False when a non-finite gradient was
met, in which case ``theta`` is the iterate at which that happened.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_EXP_FLOOR = -745.0
# reassociation lets the dot products vectorise; no-NaN/no-Inf assumptions
# are left out so the divergence check still sees non-finite gradients
_FLAGS = {"reassoc", "contract"}


@njit(cache=True, fastmath=_FLAGS)
def _adagrad_loop_gaussian(X, y, sigma2, h, theta0, eta, gamma, rho, lr, eps, tol, max_iter):
    n, p = X.shape
    s = sigma2 + h * h
    c = -2.0 * h / s**1.5 / n
    theta = theta0.copy()
    acc = np.zeros(p)
    w = np.empty(n)
    g = np.empty(p)
    tol2 = tol * tol
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(n):
            z = 0.0
            for j in range(p):
                z += X[i, j] * theta[j]
            r = y[i] - z
            w[i] = c * r * math.exp(max(-r * r / (2.0 * s), _EXP_FLOOR))
        for j in range(p):
            g[j] = gamma[j] + rho * (theta[j] - eta[j])
        for i in range(n):
            wi = w[i]
            for j in range(p):
                g[j] += X[i, j] * wi
        finite = True
        for j in range(p):
            if not math.isfinite(g[j]):
                finite = False
        if not finite:
            return theta, it, False
        step2 = 0.0
        for j in range(p):
            acc[j] += g[j] * g[j]
            st = lr * g[j] / (math.sqrt(acc[j]) + eps)
            theta[j] -= st
            step2 += st * st
        if step2 <= tol2:
            break
    return theta, it, True


@njit(cache=True, fastmath=_FLAGS)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@njit(cache=True, fastmath=_FLAGS)
def _adagrad_loop_logistic(X, y, h, theta0, eta, gamma, rho, lr, eps, tol, max_iter):
    n, p = X.shape
    c = 2.0 * h * h / n
    theta = theta0.copy()
    acc = np.zeros(p)
    w = np.empty(n)
    g = np.empty(p)
    tol2 = tol * tol
    it = 0
    for it in range(1, max_iter + 1):
        for i in range(n):
            z = 0.0
            for j in range(p):
                z += X[i, j] * theta[j]
            pi = _sigmoid(z)
            if y[i] == 0.0:
                w[i] = c * pi * pi * (1.0 - pi)
            else:
                w[i] = -c * pi * (1.0 - pi) * (1.0 - pi)
        for j in range(p):
            g[j] = gamma[j] + rho * (theta[j] - eta[j])
        for i in range(n):
            wi = w[i]
            for j in range(p):
                g[j] += X[i, j] * wi
        finite = True
        for j in range(p):
            if not math.isfinite(g[j]):
                finite = False
        if not finite:
            return theta, it, False
        step2 = 0.0
        for j in range(p):
            acc[j] += g[j] * g[j]
            st = lr * g[j] / (math.sqrt(acc[j]) + eps)
            theta[j] -= st
            step2 += st * st
        if step2 <= tol2:
            break
    return theta, it, True


def theta_step_local(family, X, y, h_y, sigma2, theta0, eta, gamma, cfg):
    args = (
        np.ascontiguousarray(theta0, dtype=float),
        np.ascontiguousarray(eta, dtype=float),
        np.ascontiguousarray(gamma, dtype=float),
        float(cfg.rho),
        float(cfg.learning_rate),
        float(cfg.adagrad_epsilon),
        float(cfg.inner_tol),
        int(cfg.inner_max_iter),
    )
    if family == "gaussian":
        return _adagrad_loop_gaussian(X, y, float(sigma2), float(h_y), *args)
    return _adagrad_loop_logistic(X, y, float(h_y), *args)
