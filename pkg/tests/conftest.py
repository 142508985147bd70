import numpy as np
import pytest

from sparse_mmd.data import Dataset

_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        _ACCEPTANCE.append((number, passed, detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_gaussian(rng, n=12, p=4, scale=1.0):
    X = rng.normal(size=(n, p))
    theta = rng.normal(size=p) * scale
    y = X @ theta + rng.normal(size=n)
    return Dataset(X, y, "gaussian"), theta


def make_binomial(rng, n=12, p=4):
    X = rng.normal(size=(n, p))
    theta = rng.normal(size=p)
    y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-X @ theta))).astype(float)
    if y.min() == y.max():
        y[0] = 1.0 - y[0]
    return Dataset(X, y, "binomial"), theta


def central_gradient(f, theta, step=1e-5):
    theta = np.asarray(theta, dtype=float)
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = step
        g[j] = (f(theta + e) - f(theta - e)) / (2.0 * step)
    return g
