"""Monte Carlo replication studies.

A study file is plain ``key = value`` text; ``#`` starts a comment and the
``method`` key may repeat::

    family = gaussian
    n = 100
    p = 200
    cov = ar:0.7
    err = t:5
    tau = 0.1
    scheme = Y
    replicates = 20
    seed = 1
    method = local
    method = lasso

Every replicate draws its data from seeds derived from ``(seed, index)``, so
the output does not depend on how many worker processes run the study.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .admm import AdmmConfig
from .errors import ContractViolation, ParameterDomainError
from .init_lasso import initial_fit
from .metrics import evaluate
from .model_selection import fit_cv, lambda_grid
from .simulation import ContaminationSpec, SimDesign, generate_replicate

logger = logging.getLogger(__name__)

WORKERS_ENV = "SPARSE_MMD_WORKERS"
METHODS = ("local", "full", "lasso")
METRICS = ("mse", "fp", "fn", "fsl", "pe", "me_percent")


def parse_cov(text: str) -> tuple[str, float]:
    """``"identity"`` or ``"ar:<rho>"`` to ``(kind, rho)``."""
    text = text.strip()
    if text == "identity":
        return "identity", 0.0
    kind, _, rho = text.partition(":")
    if kind != "ar" or not rho:
        raise ContractViolation(f"covariance must be 'identity' or 'ar:<rho>', got {text!r}")
    try:
        return "ar", float(rho)
    except ValueError:
        raise ContractViolation(f"bad AR correlation {rho!r}") from None


def parse_err(text: str) -> tuple[str, float]:
    """``"normal"``, ``"laplace"`` or ``"t:<df>"`` to ``(dist, df)``."""
    text = text.strip()
    if text in ("normal", "laplace"):
        return text, 5.0
    kind, _, df = text.partition(":")
    if kind != "t" or not df:
        raise ContractViolation(f"error law must be normal, laplace or t:<df>, got {text!r}")
    try:
        return "t", float(df)
    except ValueError:
        raise ContractViolation(f"bad degrees of freedom {df!r}") from None


def format_cov(design: SimDesign) -> str:
    return "identity" if design.cov_kind == "identity" else f"ar:{design.ar_rho!r}"


def format_err(design: SimDesign) -> str:
    return f"t:{design.df!r}" if design.error_dist == "t" else design.error_dist


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ContractViolation(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(workers, 1)


@dataclass(frozen=True)
class StudySpec:
    design: SimDesign
    replicates: int
    methods: tuple[str, ...]
    seed: int
    test_size: int = 100
    parallel_workers: int = 1
    cv_folds: int = 5
    grid_count: int | None = None
    grid_lo: float | None = None
    grid_hi: float | None = None
    scoring: str = "mmd"

    def __post_init__(self):
        if self.replicates < 1:
            raise ParameterDomainError("replicates must be at least 1")
        if self.test_size < 1:
            raise ParameterDomainError("test_size must be at least 1")
        if self.parallel_workers < 1:
            raise ParameterDomainError("parallel_workers must be at least 1")
        if not self.methods:
            raise ContractViolation("a study needs at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ContractViolation(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ContractViolation("methods must not repeat")


_INT_KEYS = {"n", "p", "replicates", "seed", "test_size", "workers", "cv_folds", "grid_count"}
_FLOAT_KEYS = {"tau", "grid_lo", "grid_hi"}
_STR_KEYS = {"family", "cov", "err", "scheme", "scoring"}


def parse_study(text: str, workers: int | None = None) -> StudySpec:
    """Build a :class:`StudySpec` from key=value text.

    ``workers`` overrides the file's ``workers`` key; when both are absent
    the ``SPARSE_MMD_WORKERS`` environment variable (default 1) is used.
    """
    values: dict = {}
    methods: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ContractViolation(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key == "method":
            methods.append(value)
            continue
        if key in values:
            raise ContractViolation(f"line {lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _STR_KEYS:
                values[key] = value
            else:
                raise ContractViolation(f"line {lineno}: unknown key {key!r}")
        except ValueError:
            raise ContractViolation(f"line {lineno}: bad value {value!r} for {key!r}") from None
    for req in ("n", "p", "replicates", "seed"):
        if req not in values:
            raise ContractViolation(f"study file is missing {req!r}")
    cov_kind, rho = parse_cov(values.get("cov", "identity"))
    dist, df = parse_err(values.get("err", "normal"))
    design = SimDesign(
        n=values["n"],
        p=values["p"],
        family=values.get("family", "gaussian"),
        cov_kind=cov_kind,
        ar_rho=rho if cov_kind == "ar" else 0.7,
        error_dist=dist,
        df=df,
        contamination=ContaminationSpec(values.get("tau", 0.0), values.get("scheme", "none")),
    )
    if workers is None:
        workers = values.get("workers", default_workers())
    return StudySpec(
        design=design,
        replicates=values["replicates"],
        methods=tuple(methods) or ("local", "lasso"),
        seed=values["seed"],
        test_size=values.get("test_size", 100),
        parallel_workers=workers,
        cv_folds=values.get("cv_folds", 5),
        grid_count=values.get("grid_count"),
        grid_lo=values.get("grid_lo"),
        grid_hi=values.get("grid_hi"),
        scoring=values.get("scoring", "mmd"),
    )


@dataclass
class ReplicateRow:
    replicate: int
    method: str
    status: str
    lam: float | None = None
    converged: bool | None = None
    metrics: dict = field(default_factory=dict)
    message: str = ""


def _fit_method(spec: StudySpec, method: str, train, cv_seed: int):
    """Returns ``(coef, lambda, converged)`` for one method."""
    if method == "lasso":
        fit = initial_fit(train, seed=cv_seed)
        return fit.beta, fit.lam, fit.converged
    grid = None
    if spec.grid_count or spec.grid_lo or spec.grid_hi:
        grid = lambda_grid(train.family, spec.grid_count, spec.grid_lo, spec.grid_hi, data=train)
    res = fit_cv(
        train, method, cfg=AdmmConfig(), grid=grid, k=spec.cv_folds, seed=cv_seed,
        scoring=spec.scoring,
    )
    return res.fit.coef, res.fit.lam, res.fit.converged


def run_replicate(spec: StudySpec, index: int) -> list[ReplicateRow]:
    """Generate, fit and score one replicate; failures become flagged rows."""
    d = spec.design
    train, test, _, cv_seed = generate_replicate(d, spec.seed, index, spec.test_size)
    rows = []
    for method in spec.methods:
        try:
            coef, lam, converged = _fit_method(spec, method, train, cv_seed)
            report = evaluate(coef, d.beta_true, test.X, test.y, d.family)
            rows.append(ReplicateRow(index, method, "ok", lam, converged, report.as_row()))
        except Exception as exc:  # recorded, never aborts the study
            logger.warning("replicate %d, method %s failed: %s", index, method, exc)
            rows.append(ReplicateRow(index, method, "failed", message=f"{type(exc).__name__}: {exc}"))
    return rows


def _run_chunk(args):
    spec, index = args
    return run_replicate(spec, index)


def run_study(spec: StudySpec) -> list[ReplicateRow]:
    """All replicate rows, ordered by replicate then by method."""
    jobs = [(spec, r) for r in range(spec.replicates)]
    if spec.parallel_workers == 1:
        results = [_run_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=spec.parallel_workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    return [row for rows in results for row in rows]


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else "NA"


def _key(spec: StudySpec) -> list[str]:
    d = spec.design
    return [format_err(d), _fmt(d.contamination.tau), d.contamination.scheme]


def _metric_names(spec: StudySpec) -> list[str]:
    last = "pe" if spec.design.family == "gaussian" else "me_percent"
    return ["mse", "fp", "fn", "fsl", last]


def raw_table(spec: StudySpec, rows: list[ReplicateRow]) -> str:
    """Per-replicate CSV, one line per (replicate, method)."""
    metrics = _metric_names(spec)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["replicate", "error_dist", "tau", "scheme", "method", "status", "lambda", "converged"]
               + metrics + ["message"])
    for r in rows:
        vals = [_fmt(r.metrics.get(m)) for m in metrics]
        w.writerow([r.replicate] + _key(spec) + [r.method, r.status, _fmt(r.lam), _fmt(r.converged)]
                   + vals + [r.message])
    return out.getvalue()


def aggregate(spec: StudySpec, rows: list[ReplicateRow]) -> list[dict]:
    """Mean and sample standard deviation per method over successful replicates.

    The deviation is ``None`` when fewer than two replicates contribute.
    """
    table = []
    for method in spec.methods:
        ok = [r for r in rows if r.method == method and r.status == "ok"]
        entry = {"method": method, "replicates": len(ok),
                 "failed": sum(r.method == method and r.status != "ok" for r in rows)}
        for m in _metric_names(spec):
            vals = np.array([r.metrics[m] for r in ok], dtype=float)
            entry[f"{m}_mean"] = float(vals.mean()) if vals.size else None
            entry[f"{m}_sd"] = float(vals.std(ddof=1)) if vals.size > 1 else None
        table.append(entry)
    return table


def aggregate_table(spec: StudySpec, rows: list[ReplicateRow]) -> str:
    metrics = _metric_names(spec)
    cols = [f"{m}_{s}" for m in metrics for s in ("mean", "sd")]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["error_dist", "tau", "scheme", "method", "replicates", "failed"] + cols)
    for e in aggregate(spec, rows):
        w.writerow(_key(spec) + [e["method"], e["replicates"], e["failed"]] + [_fmt(e[c]) for c in cols])
    return out.getvalue()


def write_study(spec: StudySpec, rows: list[ReplicateRow], out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    agg, raw = out_dir / "table.csv", out_dir / "replicates.csv"
    agg.write_text(aggregate_table(spec, rows), encoding="utf-8")
    raw.write_text(raw_table(spec, rows), encoding="utf-8")
    return agg, raw
