"""Synthetic regression designs and contamination schemes.

Column numbers in scheme descriptions are 1-based (``x1`` is column 0).

Gaussian family schemes
    ``X1``  column 2 of the chosen rows drawn from N(5, 1)
    ``X2``  columns 2 and 5 drawn from N(5, 1)
    ``Y``   response drawn from N(10, 1)

Binomial family schemes
    ``LX1``   columns 2 and 5 drawn from N(20, 1)
    ``LX2``   columns 1..10 drawn from N(20, 1)
    ``LXY1``  label flipped and columns 1..10 drawn from N(20, 1)
    ``LXY2``  first ceil(m/2) chosen rows get flipped labels, the remaining
              floor(m/2) rows get columns 1..10 drawn from N(20, 1)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ContractViolation, CovarianceNotPDError, ParameterDomainError
from .logistic import sigmoid

GAUSSIAN_SCHEMES = ("X1", "X2", "Y")
BINOMIAL_SCHEMES = ("LX1", "LX2", "LXY1", "LXY2")
ERROR_DISTS = ("normal", "laplace", "t")

_SCHEME_LOC = {"X1": 5.0, "X2": 5.0, "Y": 10.0, "LX1": 20.0, "LX2": 20.0, "LXY1": 20.0, "LXY2": 20.0}
_SCHEME_COLS = {
    "X1": [1],
    "X2": [1, 4],
    "LX1": [1, 4],
    "LX2": list(range(10)),
    "LXY1": list(range(10)),
    "LXY2": list(range(10)),
}


@dataclass(frozen=True)
class ContaminationSpec:
    tau: float = 0.0
    scheme: str = "none"
    loc: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ParameterDomainError(f"tau must lie in [0, 1], got {self.tau}")
        if self.scheme not in ("none",) + GAUSSIAN_SCHEMES + BINOMIAL_SCHEMES:
            raise ContractViolation(f"unknown contamination scheme {self.scheme!r}")
        if not self.scale > 0:
            raise ParameterDomainError("scale must be positive")

    @property
    def location(self) -> float:
        if self.loc is not None:
            return self.loc
        return _SCHEME_LOC.get(self.scheme, 0.0)

    def check_family(self, family: str) -> None:
        allowed = GAUSSIAN_SCHEMES if family == "gaussian" else BINOMIAL_SCHEMES
        if self.scheme != "none" and self.scheme not in allowed:
            raise ContractViolation(f"scheme {self.scheme} does not apply to the {family} family")


def default_beta(family: str, p: int) -> np.ndarray:
    """Sparse truth: ``(4,4,3,3,-3,-3,-4,-4,0,...)`` or ten ones then zeros."""
    head = [4, 4, 3, 3, -3, -3, -4, -4] if family == "gaussian" else [1.0] * 10
    if p < len(head):
        raise ParameterDomainError(f"p must be at least {len(head)} for the default beta")
    beta = np.zeros(p)
    beta[: len(head)] = head
    return beta


@dataclass(frozen=True)
class SimDesign:
    n: int
    p: int
    family: str = "gaussian"
    beta_true: np.ndarray | None = None
    cov_kind: str = "identity"
    ar_rho: float = 0.7
    error_dist: str = "normal"
    df: float = 5.0
    contamination: ContaminationSpec = field(default_factory=ContaminationSpec)

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ParameterDomainError("n and p must be positive")
        if self.family not in ("gaussian", "binomial"):
            raise ContractViolation(f"unknown family {self.family!r}")
        if self.cov_kind not in ("identity", "ar"):
            raise ContractViolation(f"unknown covariance kind {self.cov_kind!r}")
        if self.cov_kind == "ar" and not -1 < self.ar_rho < 1:
            raise ParameterDomainError("AR correlation must lie in (-1, 1)")
        if self.error_dist not in ERROR_DISTS:
            raise ContractViolation(f"unknown error distribution {self.error_dist!r}")
        if self.error_dist == "t" and not self.df > 2:
            raise ParameterDomainError("Student t errors need df > 2")
        self.contamination.check_family(self.family)
        beta = default_beta(self.family, self.p) if self.beta_true is None else self.beta_true
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.p,):
            raise ContractViolation(f"beta_true must have length {self.p}")
        object.__setattr__(self, "beta_true", beta)

    def covariance(self) -> np.ndarray:
        return gen_covariance(self.cov_kind, self.ar_rho, self.p)


def gen_covariance(kind: str, rho: float, p: int) -> np.ndarray:
    if p < 1:
        raise ParameterDomainError("p must be positive")
    if kind == "identity":
        return np.eye(p)
    if kind != "ar":
        raise ContractViolation(f"unknown covariance kind {kind!r}")
    if not -1 < rho < 1:
        raise ParameterDomainError(f"AR correlation must lie in (-1, 1), got {rho}")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def sample_design(n: int, cov, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. ``N(0, cov)`` as ``Z L'`` with ``L`` the Cholesky factor."""
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T):
        raise CovarianceNotPDError("covariance is not symmetric")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceNotPDError(f"covariance is not positive definite: {exc}") from None
    Z = rng.standard_normal((n, cov.shape[0]))
    return Z @ L.T


def sample_errors(n: int, dist: str, rng: np.random.Generator, df: float = 5.0) -> np.ndarray:
    if dist == "normal":
        return rng.standard_normal(n)
    if dist == "laplace":
        # inverse CDF of Laplace(0, 1)
        u = rng.uniform(-0.5, 0.5, n)
        return -np.sign(u) * np.log1p(-2.0 * np.abs(u))
    if dist == "t":
        return rng.standard_t(df, n)
    raise ContractViolation(f"unknown error distribution {dist!r}")


def gen_response(X, beta, family: str, rng: np.random.Generator, error_dist: str = "normal", df: float = 5.0):
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.shape[1] != beta.shape[0]:
        raise ContractViolation("X and beta dimensions disagree")
    eta = X @ beta
    if family == "gaussian":
        return eta + sample_errors(X.shape[0], error_dist, rng, df)
    if family == "binomial":
        return (rng.uniform(size=X.shape[0]) < sigmoid(eta)).astype(float)
    raise ContractViolation(f"unknown family {family!r}")


def contamination_count(tau: float, n: int) -> int:
    # Python's round() is half-to-even
    return int(round(tau * n))


def contaminate(dataset: Dataset, spec: ContaminationSpec, rng: np.random.Generator):
    """Replace a ``tau`` fraction of rows according to ``spec.scheme``.

    Returns ``(contaminated_dataset, sorted_row_indices)``. The input is not
    modified.
    """
    spec.check_family(dataset.family)
    m = contamination_count(spec.tau, dataset.n)
    if m > dataset.n:
        raise ContractViolation("more contaminated rows than observations")
    if m == 0 or spec.scheme == "none":
        return dataset, np.array([], dtype=int)
    if dataset.family == "binomial" and "LX" in spec.scheme and dataset.p < 10:
        raise ContractViolation("binomial schemes touch columns 1..10; need p >= 10")
    idx = np.sort(rng.choice(dataset.n, size=m, replace=False))
    X = dataset.X.copy()
    y = dataset.y.copy()
    loc, scale = spec.location, spec.scale
    scheme = spec.scheme
    if scheme == "Y":
        y[idx] = rng.normal(loc, scale, m)
    elif scheme in ("X1", "X2", "LX1", "LX2"):
        cols = _SCHEME_COLS[scheme]
        X[np.ix_(idx, cols)] = rng.normal(loc, scale, (m, len(cols)))
    elif scheme == "LXY1":
        cols = _SCHEME_COLS[scheme]
        y[idx] = 1.0 - y[idx]
        X[np.ix_(idx, cols)] = rng.normal(loc, scale, (m, len(cols)))
    elif scheme == "LXY2":
        cols = _SCHEME_COLS[scheme]
        n_flip = (m + 1) // 2
        flip, shift = idx[:n_flip], idx[n_flip:]
        y[flip] = 1.0 - y[flip]
        X[np.ix_(shift, cols)] = rng.normal(loc, scale, (shift.size, len(cols)))
    return Dataset(X, y, dataset.family), idx


def generate_clean(design: SimDesign, rng: np.random.Generator, n: int | None = None) -> Dataset:
    n = design.n if n is None else n
    X = sample_design(n, design.covariance(), rng)
    y = gen_response(X, design.beta_true, design.family, rng, design.error_dist, design.df)
    return Dataset(X, y, design.family)


def replicate_seeds(seed: int, index: int) -> dict[str, np.random.SeedSequence]:
    """Child seed sequences for replicate ``index`` of a study seeded by ``seed``.

    The rule is ``SeedSequence(seed, spawn_key=(index,))`` spawned into
    ``train``, ``contamination``, ``test`` and ``cv`` streams, so a
    replicate's data never depends on execution order.
    """
    root = np.random.SeedSequence(seed, spawn_key=(index,))
    train, contam, test, cv = root.spawn(4)
    return {"train": train, "contamination": contam, "test": test, "cv": cv}


def generate_replicate(design: SimDesign, seed: int, index: int, test_size: int = 100):
    """Contaminated training data, clean test data and contaminated row indices."""
    seeds = replicate_seeds(seed, index)
    clean = generate_clean(design, np.random.default_rng(seeds["train"]))
    train, idx = contaminate(clean, design.contamination, np.random.default_rng(seeds["contamination"]))
    test = generate_clean(design, np.random.default_rng(seeds["test"]), n=test_size)
    cv_seed = int(seeds["cv"].generate_state(1)[0])
    return train, test, idx, cv_seed


@dataclass(frozen=True)
class MomentCheck:
    name: str
    estimate: float
    target: float
    se: float

    @property
    def passed(self) -> bool:
        return abs(self.estimate - self.target) <= 3.0 * self.se


def _variance_check(name, x, target):
    c = x - x.mean()
    m2, m4 = np.mean(c**2), np.mean(c**4)
    return MomentCheck(name, float(m2), target, float(np.sqrt((m4 - m2 * m2) / x.size)))


def _kurtosis_check(name, x, target):
    # delta-method SE of m4 / m2^2 from sample central moments up to order 8
    c = x - x.mean()
    m2, m4, m6, m8 = (np.mean(c**k) for k in (2, 4, 6, 8))
    k = m4 / m2**2
    grad = np.array([-2.0 * m4 / m2**3, 1.0 / m2**2])
    cov = np.array([[m4 - m2**2, m6 - m2 * m4], [m6 - m2 * m4, m8 - m4**2]]) / x.size
    return MomentCheck(name, float(k), target, float(np.sqrt(grad @ cov @ grad)))


def moment_checks(
    seed: int = 0, n: int = 20_000, df: float = 5.0, kurtosis_df: float = 10.0, rho: float = 0.7
) -> list[MomentCheck]:
    """Large-sample moment checks for the error and design generators.

    Each check passes when the estimate lies within three standard errors of
    its target: error variances (normal 1, Laplace 2, Student t ``df/(df-2)``),
    the t kurtosis ``3 + 6/(kurtosis_df-4)`` and the lag-1 correlation of an
    AR(rho) design.

    The kurtosis check needs a finite eighth moment for its standard error,
    hence ``kurtosis_df > 8``; at ``df = 5`` the sample kurtosis has no finite
    standard error and converges too slowly to test this way.
    """
    if not kurtosis_df > 8:
        raise ParameterDomainError("kurtosis check needs kurtosis_df > 8")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)]
    t = sample_errors(n, "t", rngs[2], df)
    tk = sample_errors(n, "t", rngs[3], kurtosis_df)
    X = sample_design(n, gen_covariance("ar", rho, 2), rngs[4])
    r = float(np.corrcoef(X[:, 0], X[:, 1])[0, 1])
    return [
        _variance_check("normal variance", sample_errors(n, "normal", rngs[0]), 1.0),
        _variance_check("laplace variance", sample_errors(n, "laplace", rngs[1]), 2.0),
        _variance_check("t variance", t, df / (df - 2.0)),
        _kurtosis_check("t kurtosis", tk, 3.0 + 6.0 / (kurtosis_df - 4.0)),
        MomentCheck("ar lag-1 correlation", r, rho, float((1.0 - rho**2) / np.sqrt(n))),
    ]
