import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_binomial, make_gaussian
from sparse_mmd.admm import (
    AdmmConfig,
    ParamState,
    Problem,
    adagrad_step,
    admm_fit,
    soft_threshold,
    theta_step,
)
from sparse_mmd.data import Dataset
from sparse_mmd.errors import ContractViolation, ParameterDomainError, SolverDivergenceError
from sparse_mmd.kernels import Bandwidths, default_bandwidths


@pytest.mark.parametrize("a,b,expected", [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (-0.5, 1.0, 0.0),
                                          (1.0, 1.0, 0.0), (2.5, 0.0, 2.5)])
def test_soft_threshold_examples(a, b, expected):
    assert soft_threshold(a, b) == expected


def test_soft_threshold_boundary_is_exact_zero():
    out = soft_threshold(np.array([0.3, -0.3]), 0.3)
    assert np.all(out == 0.0)


def test_soft_threshold_rejects_negative_threshold():
    with pytest.raises(ParameterDomainError):
        soft_threshold(1.0, -0.1)


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0, 1e3), st.floats(-1e3, 1e3))
def test_soft_threshold_is_prox(a, b, z):
    obj = lambda v: b * abs(v) + 0.5 * (v - a) ** 2  # noqa: E731
    s = soft_threshold(a, b)
    assert obj(s) <= obj(z) + 1e-9 * (1 + abs(obj(z)))


def test_adagrad_zero_gradient():
    th, acc = adagrad_step(np.array([1.0]), np.array([0.0]), np.array([2.0]), 0.1, 1e-8)
    assert th[0] == 1.0 and acc[0] == 2.0


def test_adagrad_first_step_is_signed_lr():
    g = np.array([3.0, -0.01])
    th, acc = adagrad_step(np.zeros(2), g, np.zeros(2), 0.1, 1e-12)
    np.testing.assert_allclose(th, [-0.1, 0.1], rtol=1e-9)
    np.testing.assert_array_equal(acc, g * g)


def test_adagrad_hand_recursion():
    th, acc = adagrad_step(np.zeros(1), np.ones(1), np.zeros(1), 0.1, 0.0)
    assert th[0] == pytest.approx(-0.1)
    th2, _ = adagrad_step(th, np.ones(1), acc, 0.1, 0.0)
    assert th2[0] - th[0] == pytest.approx(-0.1 / np.sqrt(2))


def test_theta_step_no_loss_goes_to_eta():
    cfg = AdmmConfig(inner_max_iter=20000, learning_rate=0.5, inner_tol=1e-10)
    eta = np.array([0.3, -0.2])
    th = theta_step(lambda t: np.zeros(2), np.zeros(2), eta, np.zeros(2), cfg)
    np.testing.assert_allclose(th, eta, atol=1e-6)


def test_theta_step_quadratic():
    cfg = AdmmConfig()
    c = np.array([0.05, -0.03])
    th = theta_step(lambda t: t - c, np.zeros(2), c, np.zeros(2), cfg)
    assert np.linalg.norm(th - c) <= 1e-3


def test_theta_step_solves_regularised_quadratic():
    # loss 0.5 (t - c)' A (t - c): stationary point of the subproblem in closed form
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    c, eta, gamma, rho = np.array([1.0, -1.0]), np.array([0.5, 0.0]), np.array([0.1, -0.2]), 1.0
    cfg = AdmmConfig(inner_max_iter=50000, learning_rate=0.5, inner_tol=1e-12)
    th = theta_step(lambda t: A @ (t - c), np.zeros(2), eta, gamma, cfg)
    exact = np.linalg.solve(A + rho * np.eye(2), A @ c - gamma + rho * eta)
    np.testing.assert_allclose(th, exact, atol=1e-6)


def test_theta_step_gaussian_exit_gradient(rng):
    X = rng.normal(size=(50, 2))
    data = Dataset(X, X @ np.array([1.0, -0.5]) + 0.3 * rng.normal(size=50))
    pb = Problem(data, "local", default_bandwidths(data.X, data.y, "gaussian"))
    cfg = AdmmConfig()
    eta, gamma = np.array([0.9, -0.4]), np.zeros(2)
    grad = lambda t: pb.gradient(t, 0.09)  # noqa: E731
    th = theta_step(grad, eta.copy(), eta, gamma, cfg)
    sub = grad(th) + gamma + cfg.rho * (th - eta)
    assert np.linalg.norm(sub) < 10 * cfg.inner_tol


def test_theta_step_divergence_carries_iterate():
    def bad(t):
        return np.full_like(t, np.nan)

    with pytest.raises(SolverDivergenceError) as info:
        theta_step(bad, np.ones(2), np.zeros(2), np.zeros(2), AdmmConfig())
    np.testing.assert_array_equal(info.value.iterate, np.ones(2))


@pytest.mark.parametrize("field,value", [("rho", 0.0), ("learning_rate", -1.0), ("inner_max_iter", 0),
                                         ("outer_tol", 0.0)])
def test_config_validation(field, value):
    with pytest.raises(ParameterDomainError):
        AdmmConfig(**{field: value})


def test_state_shape_check():
    with pytest.raises(ContractViolation):
        ParamState(np.zeros(2), np.zeros(3), np.zeros(2))


def _gauss_problem(rng, n=40, p=6):
    data, _ = make_gaussian(rng, n=n, p=p)
    return Problem(data, "local", default_bandwidths(data.X, data.y, "gaussian"))


def test_huge_lambda_gives_zero(rng):
    pb = _gauss_problem(rng)
    init = ParamState.from_coef(rng.normal(size=6), 1.0)
    lam = 10 * np.max(np.abs(init.theta)) + 10
    fit = admm_fit(pb, lam, init=init)
    assert np.all(fit.coef == 0.0)
    assert fit.converged


def test_invariants_and_dual_identity(rng):
    pb = _gauss_problem(rng)
    fit = admm_fit(pb, 0.01, record_history=True)
    assert len(fit.primal_residuals) == len(fit.dual_residuals) == fit.outer_iters
    if fit.converged:
        assert fit.primal_residuals[-1] <= 1e-3 and fit.dual_residuals[-1] <= 1e-3
    for (th0, et0, g0), (th1, et1, g1) in zip(fit.history, fit.history[1:]):
        np.testing.assert_array_equal(g1, g0 + 1.0 * (th1 - et1))


def test_deterministic(rng):
    pb = _gauss_problem(rng)
    a, b = admm_fit(pb, 0.005), admm_fit(pb, 0.005)
    np.testing.assert_array_equal(a.state.eta, b.state.eta)
    assert a.objective_trace == b.objective_trace


def test_matches_proximal_gradient_oracle(rng):
    # logistic local loss on a small well-specified instance, convex near the optimum
    data, _ = make_binomial(rng, n=60, p=4)
    bw = Bandwidths(1.0, np.sqrt(2) / 2)
    pb = Problem(data, "local", bw)
    lam = 2e-3
    cfg = AdmmConfig(outer_tol=1e-9, inner_tol=1e-11, inner_max_iter=20000, outer_max_iter=5000)
    fit = admm_fit(pb, lam, cfg)
    # oracle: proximal gradient with a fixed small step
    th = np.zeros(4)
    step = 2.0
    for _ in range(200000):
        new = soft_threshold(th - step * pb.gradient(th), step * lam)
        if np.max(np.abs(new - th)) < 1e-14:
            break
        th = new
    np.testing.assert_allclose(fit.coef, th, atol=1e-5)
    np.testing.assert_array_equal(fit.coef == 0, th == 0)


def test_convex_instance_objective_trace_monitor(rng):
    data, _ = make_binomial(rng, n=60, p=4)
    pb = Problem(data, "local", Bandwidths(1.0, np.sqrt(2) / 2))
    fit = admm_fit(pb, 1e-3)
    assert np.all(np.isfinite(fit.objective_trace))
    assert fit.objective_increases >= 0


def test_intercept_is_not_penalised(rng):
    X = rng.normal(size=(60, 3))
    y = 5.0 + 0.2 * rng.normal(size=60)
    data = Dataset(X, y)
    pb = Problem(data, "local", default_bandwidths(X, y, "gaussian"), fit_intercept=True)
    init = ParamState.from_coef(np.array([4.0, 0.0, 0.0, 0.0]), 1.0)
    fit = admm_fit(pb, 10.0, init=init)
    assert np.all(fit.coef == 0.0)
    assert fit.intercept == pytest.approx(5.0, abs=0.2)


def test_dimension_mismatch(rng):
    pb = _gauss_problem(rng)
    with pytest.raises(ContractViolation):
        admm_fit(pb, 0.1, init=ParamState.from_coef(np.zeros(3), 1.0))


def test_negative_lambda(rng):
    with pytest.raises(ParameterDomainError):
        admm_fit(_gauss_problem(rng), -1.0)


def test_unknown_variant(rng):
    data, _ = make_gaussian(rng)
    with pytest.raises(ContractViolation):
        Problem(data, "global", Bandwidths(1.0, 1.0))
