"""``sparse-mmd`` command line: ``fit``, ``simulate`` and ``replicate``.

Exit codes: 0 success, 1 input or usage error, 2 non-convergence (results
are still written), 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .admm import AdmmConfig, Problem, admm_fit
from .data import csv_read, csv_write
from .errors import SolverDivergenceError
from .kernels import default_bandwidths
from .model_selection import fit_cv, initial_state
from .init_lasso import initial_fit
from .simulation import ContaminationSpec, SimDesign, generate_replicate
from .study import format_cov, format_err, parse_cov, parse_err, parse_study, run_study, write_study

logger = logging.getLogger("sparse_mmd")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for non-convergence here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(v: float) -> str:
    return repr(float(v))


def cmd_fit(args) -> int:
    data = csv_read(args.input, args.family)
    bw = default_bandwidths(data.X, data.y, data.family)
    cfg = AdmmConfig()
    if args.cv:
        res = fit_cv(data, args.variant, bw=bw, cfg=cfg, seed=args.seed, fit_intercept=args.intercept)
        fit = res.fit
        logger.info("cross-validation selected lambda=%s", _fmt(fit.lam))
    else:
        init_lam = initial_fit(data, seed=args.seed).lam
        problem = Problem(data, args.variant, bw, args.intercept)
        fit = admm_fit(problem, args.lam, cfg, initial_state(data, init_lam, args.intercept))

    out = Path(args.out)
    with out.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "estimate"])
        if args.intercept:
            w.writerow(["intercept", _fmt(fit.intercept)])
        for j, b in enumerate(fit.coef, start=1):
            w.writerow([f"x{j}", _fmt(b)])

    diag = {
        "family": data.family,
        "variant": args.variant,
        "lambda": _fmt(fit.lam),
        "selected_by": "cv" if args.cv else "user",
        "seed": str(args.seed),
        "h_x": _fmt(bw.h_x),
        "h_y": _fmt(bw.h_y),
        "sigma2": _fmt(fit.sigma2) if fit.sigma2 is not None else "NA",
        "converged": "true" if fit.converged else "false",
        "outer_iters": str(fit.outer_iters),
        "primal_residual": _fmt(fit.primal_residuals[-1]),
        "dual_residual": _fmt(fit.dual_residuals[-1]),
        "objective": _fmt(fit.objective_trace[-1]),
        "nonzero": str(int(np.count_nonzero(fit.coef))),
    }
    diag_path = Path(args.diagnostics) if args.diagnostics else out.with_suffix(".diag.txt")
    diag_path.write_text("".join(f"{k}={v}\n" for k, v in diag.items()), encoding="utf-8")
    print(f"lambda={diag['lambda']} converged={diag['converged']} nonzero={diag['nonzero']}")
    if not fit.converged:
        logger.warning("ADMM stopped at the iteration cap without meeting the tolerances")
        return EXIT_NONCONVERGED
    return EXIT_OK


def write_manifest(path, design: SimDesign, seed: int, index: int, test_size: int, rows) -> None:
    c = design.contamination
    lines = {
        "family": design.family,
        "n": design.n,
        "p": design.p,
        "cov": format_cov(design),
        "err": format_err(design),
        "tau": repr(c.tau),
        "scheme": c.scheme,
        "seed": seed,
        "replicate": index,
        "test_size": test_size,
        "beta_true": " ".join(repr(float(b)) for b in design.beta_true),
        # 1-based data-row numbers of the training CSV
        "contaminated_rows": " ".join(str(int(i) + 1) for i in rows),
    }
    Path(path).write_text("".join(f"{k}={v}\n" for k, v in lines.items()), encoding="utf-8")


def read_manifest(path):
    """Returns ``(design, seed, replicate, test_size, contaminated_rows)``."""
    kv = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            kv[k] = v
    cov_kind, rho = parse_cov(kv["cov"])
    dist, df = parse_err(kv["err"])
    design = SimDesign(
        n=int(kv["n"]), p=int(kv["p"]), family=kv["family"],
        beta_true=np.array([float(b) for b in kv["beta_true"].split()]),
        cov_kind=cov_kind, ar_rho=rho if cov_kind == "ar" else 0.7,
        error_dist=dist, df=df,
        contamination=ContaminationSpec(float(kv["tau"]), kv["scheme"]),
    )
    rows = [int(r) for r in kv["contaminated_rows"].split()]
    return design, int(kv["seed"]), int(kv["replicate"]), int(kv["test_size"]), rows


def cmd_simulate(args) -> int:
    cov_kind, rho = parse_cov(args.cov)
    dist, df = parse_err(args.err)
    design = SimDesign(
        n=args.n, p=args.p, family=args.family, cov_kind=cov_kind,
        ar_rho=rho if cov_kind == "ar" else 0.7, error_dist=dist, df=df,
        contamination=ContaminationSpec(args.tau, args.scheme),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    test_size = max(args.test_size, 1)
    train, test, idx, _ = generate_replicate(design, args.seed, args.replicate, test_size)
    csv_write(train, out / "train.csv")
    if args.test_size > 0:
        csv_write(test, out / "test.csv")
    write_manifest(out / "manifest.txt", design, args.seed, args.replicate, test_size, idx)
    print(f"wrote {out / 'train.csv'} ({train.n} x {train.p}), {idx.size} contaminated rows")
    return EXIT_OK


def cmd_replicate(args) -> int:
    spec = parse_study(Path(args.spec).read_text(encoding="utf-8"), workers=args.workers)
    rows = run_study(spec)
    agg, raw = write_study(spec, rows, args.out)
    failed = sum(r.status != "ok" for r in rows)
    print(f"wrote {agg} and {raw}; {failed} failed fit(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-mmd", description="Sparse MMD regression estimators.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit one CSV dataset")
    f.add_argument("input", help="CSV with header y,x1,...,xp")
    f.add_argument("--family", choices=("gaussian", "binomial"), default="gaussian")
    f.add_argument("--variant", choices=("local", "full"), default="local")
    g = f.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float, help="penalty level")
    g.add_argument("--cv", action="store_true", help="choose the penalty by 5-fold CV")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--intercept", action="store_true", help="fit an unpenalized intercept")
    f.add_argument("--out", required=True, help="coefficient CSV to write")
    f.add_argument("--diagnostics", help="diagnostics file (default: <out>.diag.txt)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--family", choices=("gaussian", "binomial"), default="gaussian")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--p", type=int, default=200)
    s.add_argument("--cov", default="identity", help="identity or ar:<rho>")
    s.add_argument("--err", default="normal", help="normal, laplace or t:<df>")
    s.add_argument("--tau", type=float, default=0.0)
    s.add_argument("--scheme", default="none")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replicate", type=int, default=0, help="replicate index within the seed")
    s.add_argument("--test-size", type=int, default=100, help="clean test rows; 0 skips test.csv")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("replicate", help="run a replication study")
    r.add_argument("spec", help="study file (key = value lines)")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--workers", type=int, help="worker processes (default: study file, then "
                   "$SPARSE_MMD_WORKERS, then 1)")
    r.set_defaults(func=cmd_replicate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SolverDivergenceError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last resort
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
