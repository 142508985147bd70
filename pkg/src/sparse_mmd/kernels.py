"""Kernels on inputs and responses, and the median-heuristic bandwidth.

The input kernel uses the ``exp(-||u - v||^2 / (2 h^2))`` convention so that
``h`` is on the same scale as the pairwise distances returned by
:func:`median_heuristic`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import (
    ContractViolation,
    DegenerateBandwidthError,
    NumericInputError,
    ParameterDomainError,
)

BINARY_H_Y = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class Bandwidths:
    """Kernel scales for inputs (``h_x``) and responses (``h_y``)."""

    h_x: float
    h_y: float

    def __post_init__(self):
        if not (self.h_x > 0 and math.isfinite(self.h_x)):
            raise ParameterDomainError(f"h_x must be positive, got {self.h_x}")
        if not (self.h_y > 0 and math.isfinite(self.h_y)):
            raise ParameterDomainError(f"h_y must be positive, got {self.h_y}")


def _as_vector(u, name):
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericInputError(f"{name} contains non-finite values")
    return arr


def gaussian_kernel_x(u, v, h_x: float) -> float:
    """Gaussian kernel ``exp(-||u - v||^2 / (2 h_x^2))`` on input vectors."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise ContractViolation(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not h_x > 0:
        raise ParameterDomainError(f"h_x must be positive, got {h_x}")
    sq = float(np.sum((u - v) ** 2))
    return math.exp(max(-sq / (2.0 * h_x * h_x), -745.0)) if sq > 0 else 1.0


def gaussian_gram(X, h_x: float) -> np.ndarray:
    """Matrix of :func:`gaussian_kernel_x` over all row pairs of ``X``."""
    X = np.asarray(X, dtype=float)
    if not h_x > 0:
        raise ParameterDomainError(f"h_x must be positive, got {h_x}")
    sq_norms = np.einsum("ij,ij->i", X, X)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    arg = np.maximum(-d2 / (2.0 * h_x * h_x), -745.0)
    return np.exp(arg)


def geometric_kernel_y(y1, y2, h_y: float) -> float:
    """Geometric kernel ``0.5 h_y (1 - h_y)^|y1 - y2|`` on binary labels."""
    if not 0.0 < h_y < 1.0:
        raise ParameterDomainError(f"h_y must lie in (0, 1), got {h_y}")
    if y1 not in (0, 1) or y2 not in (0, 1):
        raise ContractViolation(f"labels must be 0 or 1, got {y1!r}, {y2!r}")
    return 0.5 * h_y * (1.0 - h_y) ** abs(int(y1) - int(y2))


def median_heuristic(points) -> float:
    """Median of all pairwise Euclidean distances between ``points``.

    ``points`` may be a 1-D array of scalars or a 2-D array with one point per
    row. With an even number of pairs the two central order statistics are
    averaged.

    Raises:
        DegenerateBandwidthError: if every pairwise distance is zero, or if
            the median distance itself is zero.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ContractViolation("median_heuristic needs at least two points")
    if not np.all(np.isfinite(pts)):
        raise NumericInputError("points contain non-finite values")
    dists = pdist(pts)
    med = float(np.median(dists))
    if med <= 0.0:
        raise DegenerateBandwidthError(
            "median pairwise distance is zero; supply a bandwidth explicitly"
        )
    return med


def default_bandwidths(X, y, family: str) -> Bandwidths:
    """Median-heuristic bandwidths; binary responses use the fixed ``h_y``."""
    h_x = median_heuristic(X)
    h_y = BINARY_H_Y if family == "binomial" else median_heuristic(y)
    return Bandwidths(h_x=h_x, h_y=h_y)
