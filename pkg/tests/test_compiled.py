import numpy as np
import pytest
from conftest import make_binomial, make_gaussian

from sparse_mmd.admm import AdmmConfig, Problem, admm_fit
from sparse_mmd.errors import SolverDivergenceError
from sparse_mmd.kernels import Bandwidths


def _pair(family, seed, n=30, p=6):
    rng = np.random.default_rng(seed)
    data, _ = (make_gaussian if family == "gaussian" else make_binomial)(rng, n, p)
    bw = Bandwidths(1.0, 1.3 if family == "gaussian" else np.sqrt(2) / 2)
    return Problem(data, "local", bw, compiled=True), Problem(data, "local", bw, compiled=False), rng


@pytest.mark.parametrize("family", ["gaussian", "binomial"])
@pytest.mark.parametrize("seed", range(4))
def test_compiled_theta_step_matches_python(family, seed):
    # a few iterations keep rounding differences from compounding
    fast, slow, rng = _pair(family, seed)
    p = fast.data.p
    theta, eta, gamma = rng.normal(size=(3, p))
    cfg = AdmmConfig(inner_max_iter=5, inner_tol=1e-12)
    a, ia = fast.theta_step(theta, eta, gamma, 0.8, cfg)
    b, ib = slow.theta_step(theta, eta, gamma, 0.8, cfg)
    assert ia == ib == 5
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("family", ["gaussian", "binomial"])
def test_compiled_theta_step_reaches_same_minimiser(family):
    fast, slow, rng = _pair(family, 7)
    p = fast.data.p
    eta, gamma = rng.normal(size=(2, p))
    cfg = AdmmConfig(inner_max_iter=20_000, inner_tol=1e-9)
    a, _ = fast.theta_step(np.zeros(p), eta, gamma, 1.0, cfg)
    b, _ = slow.theta_step(np.zeros(p), eta, gamma, 1.0, cfg)
    np.testing.assert_allclose(a, b, atol=1e-6)


@pytest.mark.parametrize("family", ["gaussian", "binomial"])
def test_compiled_fit_matches_python_fit(family):
    fast, slow, _ = _pair(family, 8, n=40, p=8)
    cfg = AdmmConfig(outer_max_iter=50)
    a = admm_fit(fast, 0.02, cfg)
    b = admm_fit(slow, 0.02, cfg)
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-5)
    np.testing.assert_array_equal(a.coef != 0, b.coef != 0)


def test_compiled_divergence_raises_with_iterate():
    fast, _, _ = _pair("gaussian", 9)
    p = fast.data.p
    with pytest.raises(SolverDivergenceError) as info:
        fast.theta_step(np.zeros(p), np.zeros(p), np.full(p, np.inf), 1.0, AdmmConfig())
    assert info.value.iterate is not None
