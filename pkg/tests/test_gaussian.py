import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import central_gradient, make_gaussian
from sparse_mmd.data import Dataset
from sparse_mmd.errors import ContractViolation, ParameterDomainError
from sparse_mmd.gaussian import (
    SIGMA2_FLOOR,
    GaussianLossParams,
    expected_gaussian_kernel,
    grad_local_gaussian,
    grad_pairwise_gaussian,
    local_convexity_check_gaussian,
    local_loss_gaussian,
    local_losses_gaussian,
    objective_gaussian,
    pairwise_loss_gaussian,
    update_sigma2,
)
from sparse_mmd.kernels import Bandwidths, gaussian_gram


def normal_pdf(y, mu, var):
    return math.exp(-((y - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)


def ky(a, b, h):
    return math.exp(-((a - b) ** 2) / (2 * h * h))


def quad_expected_kernel(mu, var, y0, h):
    sd = math.sqrt(var)
    val, _ = integrate.quad(lambda y: ky(y, y0, h) * normal_pdf(y, mu, var),
                            mu - 40 * sd, mu + 40 * sd, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def quad_double_kernel(mu1, mu2, var, h):
    # E K(Y, Y') with Y ~ N(mu1, var), Y' ~ N(mu2, var) independent
    sd = math.sqrt(var)
    inner = lambda y: quad_expected_kernel(mu2, var, y, h)  # noqa: E731
    val, _ = integrate.quad(lambda y: inner(y) * normal_pdf(y, mu1, var),
                            mu1 - 40 * sd, mu1 + 40 * sd, epsabs=1e-12, epsrel=1e-11, limit=200)
    return val


@pytest.mark.parametrize("mu,var,y0,h", [(0.0, 1.0, 0.0, 1.0), (1.5, 0.25, -1.0, 0.5), (-2.0, 4.0, 3.0, 2.0)])
def test_expected_kernel_matches_quadrature(mu, var, y0, h):
    assert expected_gaussian_kernel(mu, var, y0, h) == pytest.approx(
        quad_expected_kernel(mu, var, y0, h), abs=1e-10
    )


def test_expected_kernel_peak():
    # mu = y0: h / sqrt(sigma2 + h^2)
    assert expected_gaussian_kernel(0.3, 1.0, 0.3, 1.0) == pytest.approx(1 / math.sqrt(2))


@pytest.mark.parametrize("seed", range(4))
def test_losses_match_defining_integrals(seed):
    r = np.random.default_rng(seed)
    p = 3
    theta = r.uniform(-2, 2, p)
    xi, xj = r.normal(size=p), r.normal(size=p)
    yi = float(r.normal() * 2)
    s2, h = r.uniform(0.25, 4), r.uniform(0.5, 2)
    par = GaussianLossParams(theta, s2, h)
    mi, mj = xi @ theta, xj @ theta
    local = quad_double_kernel(mi, mi, s2, h) - 2 * quad_expected_kernel(mi, s2, yi, h)
    pair = quad_double_kernel(mi, mj, s2, h) - 2 * quad_expected_kernel(mj, s2, yi, h)
    assert local_loss_gaussian(par, xi, yi) == pytest.approx(local, abs=1e-8)
    assert pairwise_loss_gaussian(par, xi, xj, yi) == pytest.approx(pair, abs=1e-8)


def test_pairwise_reduces_to_local_on_diagonal(rng):
    par = GaussianLossParams(rng.normal(size=3), 0.7, 1.1)
    x = rng.normal(size=3)
    assert pairwise_loss_gaussian(par, x, x, 0.4) == pytest.approx(local_loss_gaussian(par, x, 0.4), abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 10), st.floats(0.05, 10))
def test_local_loss_bounds(r, sigma2, h):
    par = GaussianLossParams(np.zeros(1), sigma2, h)
    v = local_loss_gaussian(par, [0.0], r)
    top = h / math.sqrt(2 * sigma2 + h * h)
    low = top - 2 * h / math.sqrt(sigma2 + h * h)
    assert low - 1e-12 <= v <= top + 1e-12
    assert v >= local_loss_gaussian(par, [0.0], 0.0) - 1e-12


def test_vectorised_local_matches_scalar(rng):
    data, theta = make_gaussian(rng, n=8, p=3)
    v = local_losses_gaussian(theta, data.X, data.y, 0.9, 1.4)
    par = GaussianLossParams(theta, 0.9, 1.4)
    expected = [local_loss_gaussian(par, data.X[i], data.y[i]) for i in range(8)]
    np.testing.assert_allclose(v, expected, rtol=0, atol=1e-14)


def test_objectives_match_enumeration(rng):
    data, theta = make_gaussian(rng, n=7, p=3)
    bw = Bandwidths(1.7, 1.2)
    par = GaussianLossParams(theta, 0.8, bw.h_y)
    K = gaussian_gram(data.X, bw.h_x)
    n = data.n
    full = sum(K[i, j] * pairwise_loss_gaussian(par, data.X[i], data.X[j], data.y[i])
               for i in range(n) for j in range(n)) / n**2
    local = sum(local_loss_gaussian(par, data.X[i], data.y[i]) for i in range(n)) / n
    assert objective_gaussian("full", theta, data, 0.8, bw) == pytest.approx(full, abs=1e-13)
    assert objective_gaussian("local", theta, data, 0.8, bw) == pytest.approx(local, abs=1e-13)
    assert objective_gaussian("full", theta, data, 0.8, bw, kx=K) == pytest.approx(full, abs=1e-13)


@pytest.mark.parametrize("variant", ["local", "full"])
@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(variant, seed):
    r = np.random.default_rng(seed)
    data, theta = make_gaussian(r, n=9, p=4)
    bw = Bandwidths(2.0, 1.5)
    f = lambda t: objective_gaussian(variant, t, data, 1.3, bw)  # noqa: E731
    g = (grad_local_gaussian(theta, data, 1.3, bw.h_y) if variant == "local"
         else grad_pairwise_gaussian(theta, data, 1.3, bw))
    fd = central_gradient(f, theta)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


def test_convexity_check_boundary():
    # sigma2 + h^2 = 4, so |r| = 2 is the edge
    assert local_convexity_check_gaussian([1.0], [1.0], 3.0, 3.0, 1.0)
    assert not local_convexity_check_gaussian([1.0], [1.0], 3.01, 3.0, 1.0)


@pytest.mark.parametrize("r", [0.0, 0.5, 1.5, 2.5, 4.0])
def test_convexity_check_matches_second_derivative(r):
    # 1-d loss in theta with x = 1, y = r: second derivative sign by differences
    par = lambda t: local_loss_gaussian(GaussianLossParams([t], 1.0, 1.0), [1.0], r)  # noqa: E731
    e = 1e-3
    d2 = (par(e) - 2 * par(0.0) + par(-e)) / e**2
    assert (d2 >= -1e-7) == local_convexity_check_gaussian([0.0], [1.0], r, 1.0, 1.0)


def test_update_sigma2(rng):
    data, theta = make_gaussian(rng, n=10, p=2)
    res = data.y - data.X @ theta
    assert update_sigma2(theta, data) == pytest.approx(np.mean(res**2), rel=1e-14)


def test_update_sigma2_floor():
    X = np.eye(3)
    data = Dataset(X, [1.0, 2.0, 3.0])
    assert update_sigma2([1.0, 2.0, 3.0], data) == SIGMA2_FLOOR


@pytest.mark.parametrize("sigma2,h", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_parameter_domain(sigma2, h):
    with pytest.raises(ParameterDomainError):
        GaussianLossParams(np.zeros(2), sigma2, h)


def test_dimension_mismatch():
    par = GaussianLossParams(np.zeros(2), 1.0, 1.0)
    with pytest.raises(ContractViolation):
        local_loss_gaussian(par, [1.0, 2.0, 3.0], 0.0)


def test_objective_requires_gaussian_family(rng):
    data = Dataset(rng.normal(size=(4, 2)), [0, 1, 0, 1], "binomial")
    with pytest.raises(ContractViolation):
        objective_gaussian("local", np.zeros(2), data, 1.0, Bandwidths(1.0, 1.0))
