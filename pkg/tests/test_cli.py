import json
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from censored2sls.cli import main
from censored2sls.simulation import DgpConfig, draw_sample, write_csv
from oracles import textbook_2sls

FIT_ARGS = ["--outcome", "y", "--status", "delta", "--endog", "x2", "--instruments", "z2",
            "--exog", "x3", "--intercept"]


def _write(path, header, rows):
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def sim_csv(tmp_path):
    path = tmp_path / "sim.csv"
    write_csv(draw_sample(DgpConfig(n=1000, seed=7), 0), path)
    return path


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_json(capsys, sim_csv):
    code, out, _ = _run(capsys, ["fit", "--data", str(sim_csv), *FIT_ARGS, "--format", "json"])
    assert code == 0
    report = json.loads(out)
    names = [c["name"] for c in report["coefficients"]]
    assert names == ["const", "x2", "x3"]
    x2 = report["coefficients"][1]
    assert abs(x2["estimate"] - 1.0) < 0.5
    assert x2["ci_lower"] < x2["estimate"] < x2["ci_upper"]
    assert 0 <= report["censoring_fraction"] <= 1
    assert report["n"] == 1000
    assert 0 < report["weight_sum"] <= 1


def test_table_and_json_agree(capsys, sim_csv):
    _, js, _ = _run(capsys, ["fit", "--data", str(sim_csv), *FIT_ARGS, "--format", "json"])
    code, table, _ = _run(capsys, ["fit", "--data", str(sim_csv), *FIT_ARGS])
    assert code == 0
    report = json.loads(js)
    rows = {line.split()[0]: line.split()[1:] for line in table.splitlines()[1:4]}
    keys = ("estimate", "std_error", "ci_lower", "ci_upper", "z", "p_value")
    for c in report["coefficients"]:
        assert rows[c["name"]] == [f"{c[k]:.6g}" for k in keys]
    assert f"weight sum = {report['weight_sum']:.6g}" in table


def test_fit_without_censoring_matches_oracle(capsys, tmp_path, rng):
    n = 400
    z2, x3, v, e = rng.uniform(-1, 1, (4, n))
    x2 = z2 + v
    y = 0.5 + x2 + x3 + v + e
    path = _write(tmp_path / "d.csv", ["y", "delta", "x2", "x3", "z2"],
                  [(repr(float(y[i])), 1, repr(float(x2[i])), repr(float(x3[i])), repr(float(z2[i])))
                   for i in range(n)])
    code, out, _ = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS, "--format", "json"])
    assert code == 0
    est = [c["estimate"] for c in json.loads(out)["coefficients"]]
    x = np.column_stack([np.ones(n), x2, x3])
    z = np.column_stack([np.ones(n), z2, x3])
    assert_allclose(est, textbook_2sls(y, x, z), rtol=0, atol=1e-8)


def test_bad_status_names_row(capsys, tmp_path):
    path = _write(tmp_path / "d.csv", ["y", "delta", "x2", "x3", "z2"],
                  [(1.0, 1, 0.1, 0.2, 0.3), (2.0, 2, 0.2, 0.1, 0.0), (3.0, 0, 0.5, 0.5, 0.5)])
    code, _, err = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS])
    assert code == 3
    assert "row 3" in err and "delta" in err


def test_non_numeric_cell(capsys, tmp_path):
    path = _write(tmp_path / "d.csv", ["y", "delta", "x2", "x3", "z2"],
                  [(1.0, 1, 0.1, 0.2, 0.3), (2.0, 1, "abc", 0.1, 0.0)])
    code, _, err = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS])
    assert code == 3
    assert "row 3" in err and "'x2'" in err


def test_missing_and_duplicate_columns(capsys, tmp_path):
    path = _write(tmp_path / "d.csv", ["y", "delta", "x2", "z2"], [(1.0, 1, 0.1, 0.3)])
    code, _, err = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS])
    assert code == 3 and "x3" in err
    path = _write(tmp_path / "e.csv", ["y", "delta", "x2", "x2", "x3", "z2"], [(1, 1, 0, 0, 0, 0)])
    code, _, err = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS])
    assert code == 3 and "duplicate" in err


def test_all_censored(capsys, tmp_path, rng):
    rows = [(float(i), 0, *rng.normal(size=3)) for i in range(20)]
    path = _write(tmp_path / "d.csv", ["y", "delta", "x2", "x3", "z2"], rows)
    code, _, err = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS])
    assert code == 3 and "censored" in err


def test_rank_failure_exit_code(capsys, tmp_path, rng):
    rows = [(float(i), 1, rng.normal(), rng.normal(), 1.0) for i in range(20)]
    path = _write(tmp_path / "d.csv", ["y", "delta", "x2", "x3", "z2"], rows)
    code, _, err = _run(capsys, ["fit", "--data", str(path), *FIT_ARGS])
    assert code == 4 and "Szz" in err


def test_overlapping_columns_is_usage_error(capsys, sim_csv):
    code, _, err = _run(capsys, ["fit", "--data", str(sim_csv), "--outcome", "y", "--status",
                                 "delta", "--endog", "x2", "--instruments", "x2"])
    assert code == 2 and "x2" in err


def test_too_few_instruments_is_usage_error(capsys, sim_csv):
    code, _, _ = _run(capsys, ["fit", "--data", str(sim_csv), "--outcome", "y", "--status",
                               "delta", "--endog", "x2", "x3", "--instruments", "z2"])
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["simulate", "--n", "5"],
    ["simulate", "--reps", "0"],
    ["simulate", "--alpha", "2"],
    ["fit", "--outcome", "y"],
    [],
])
def test_argparse_usage_errors(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


def test_simulate_is_deterministic(capsys):
    argv = ["simulate", "--n", "200", "--reps", "1", "--seed", "42"]
    _, first, _ = _run(capsys, argv)
    _, second, _ = _run(capsys, argv)
    assert first == second
    assert "coverage" in first and "n_failed" in first


def test_simulate_json(capsys):
    code, out, _ = _run(capsys, ["simulate", "--n", "100", "--reps", "5", "--rho", "-1",
                                 "--format", "json"])
    assert code == 0
    summary = json.loads(out)
    assert summary["rho"] == -1.0 and summary["reps"] == 5
    assert set(summary) >= {"bias", "variance", "mse", "coverage", "width", "pct_significant",
                            "n_failed"}


def test_module_entry_point(sim_csv):
    proc = subprocess.run(
        [sys.executable, "-m", "censored2sls", "fit", "--data", str(sim_csv), *FIT_ARGS,
         "--format", "json"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["n"] == 1000


@pytest.mark.parametrize("extra, key, lo, hi", [
    ([], "coverage", 0.86, 0.92),
    (["--rho", "-3"], "pct_significant", 0.63, 0.79),
])
def test_simulate_reference_runs(capsys, extra, key, lo, hi):
    code, out, _ = _run(capsys, ["simulate", "--n", "1000", "--reps", "1000", "--seed", "1",
                                 *extra, "--format", "json"])
    assert code == 0
    assert lo <= json.loads(out)[key] <= hi
