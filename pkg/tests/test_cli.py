import numpy as np
import pytest

from sparse_mmd.cli import main, read_manifest
from sparse_mmd.data import csv_read
from sparse_mmd.simulation import generate_replicate


def _simulate(tmp_path, *extra, name="sim"):
    out = tmp_path / name
    code = main(["simulate", "--n", "40", "--p", "10", "--seed", "3", "--out", str(out), *extra])
    assert code == 0
    return out


def test_simulate_writes_files_and_manifest(tmp_path):
    out = _simulate(tmp_path, "--tau", "0.1", "--scheme", "Y", "--replicate", "2")
    train = csv_read(out / "train.csv")
    assert (train.n, train.p) == (40, 10)
    assert csv_read(out / "test.csv").n == 100
    design, seed, rep, test_size, rows = read_manifest(out / "manifest.txt")
    assert (seed, rep, test_size, len(rows)) == (3, 2, 100, 4)
    assert min(rows) >= 1
    again, _, idx, _ = generate_replicate(design, seed, rep, test_size)
    np.testing.assert_array_equal(again.X, train.X)
    np.testing.assert_array_equal(again.y, train.y)
    np.testing.assert_array_equal(idx + 1, rows)


def test_simulate_tau_zero_and_no_test(tmp_path):
    out = _simulate(tmp_path, "--test-size", "0")
    assert not (out / "test.csv").exists()
    assert "contaminated_rows=\n" in (out / "manifest.txt").read_text()


def test_simulate_bad_scheme_exit_1(tmp_path, capsys):
    code = main(["simulate", "--scheme", "LX1", "--tau", "0.1", "--out", str(tmp_path / "x")])
    assert code == 1
    assert "does not apply" in capsys.readouterr().err


def test_fit_lambda_and_determinism(tmp_path, capsys):
    out = _simulate(tmp_path)
    args = ["fit", str(out / "train.csv"), "--lambda", "0.05", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    lines = a.splitlines()
    assert lines[0] == "term,estimate" and len(lines) == 11 and lines[1].startswith("x1,")
    diag = dict(l.split("=", 1) for l in (tmp_path / "a.diag.txt").read_text().splitlines())
    assert diag["selected_by"] == "user" and float(diag["lambda"]) == 0.05
    assert diag["converged"] == "true"


def test_fit_with_intercept(tmp_path):
    out = _simulate(tmp_path)
    code = main(["fit", str(out / "train.csv"), "--lambda", "0.05", "--intercept",
                 "--out", str(tmp_path / "c.csv"), "--diagnostics", str(tmp_path / "d.txt")])
    assert code == 0
    assert (tmp_path / "c.csv").read_text().splitlines()[1].startswith("intercept,")
    assert (tmp_path / "d.txt").exists()


def test_fit_nonconvergence_exit_2(tmp_path, monkeypatch):
    import sparse_mmd.cli as cli
    from sparse_mmd.admm import AdmmConfig

    out = _simulate(tmp_path)
    monkeypatch.setattr(cli, "AdmmConfig", lambda: AdmmConfig(outer_max_iter=1))
    code = main(["fit", str(out / "train.csv"), "--lambda", "0.01", "--out", str(tmp_path / "e.csv")])
    assert code == 2
    assert (tmp_path / "e.csv").exists()


def test_fit_binomial_bad_row_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("y,x1\n0,1\n1,2\n2,0.5\n")
    code = main(["fit", str(path), "--family", "binomial", "--lambda", "0.1", "--out", str(tmp_path / "o.csv")])
    assert code == 1
    assert "line 4" in capsys.readouterr().err


def test_fit_missing_file_exit_1(tmp_path):
    assert main(["fit", str(tmp_path / "none.csv"), "--lambda", "0.1", "--out", str(tmp_path / "o.csv")]) == 1


@pytest.mark.parametrize(
    "argv",
    [[], ["fit", "x.csv", "--out", "o.csv"], ["fit", "x.csv", "--cv", "--lambda", "1", "--out", "o"], ["nope"]],
)
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_replicate_lasso_only(tmp_path):
    spec = tmp_path / "s.txt"
    spec.write_text("n = 30\np = 10\nreplicates = 2\nseed = 0\nmethod = lasso\n")
    assert main(["replicate", str(spec), "--out", str(tmp_path / "r"), "--workers", "1"]) == 0
    table = (tmp_path / "r" / "table.csv").read_text().splitlines()
    assert table[0].startswith("error_dist,tau,scheme,method,replicates,failed,mse_mean")
    assert len((tmp_path / "r" / "replicates.csv").read_text().splitlines()) == 3
