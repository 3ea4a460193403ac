import csv

import numpy as np
import pytest

from aftmean.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_FIT,
    EXIT_OK,
    load_csv,
    main,
    save_design_csv,
)
from aftmean.errors import DataError
from aftmean.gehan import DesignData
from aftmean.simulation import parse_scenario_text
from conftest import random_censored_sample

try:
    from importlib import resources

    CONFIG_DIR = resources.files("aftmean").joinpath("configs")
except Exception:  # pragma: no cover
    CONFIG_DIR = None


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture
def linear_csv(tmp_path):
    # exact linear data: T = 2 + x1 + x2, uncensored
    rng = np.random.default_rng(3)
    rows = []
    for _ in range(40):
        x1, x2 = rng.normal(size=2)
        rows.append([2.0 + x1 + x2, 1, x1, x2])
    path = tmp_path / "linear.csv"
    write_csv(path, ["time", "status", "x1", "x2"], rows)
    return str(path)


# ---------------------------------------------------------------- load_csv


def test_load_csv_roundtrip(tmp_path, rng):
    y, ev, x = random_censored_sample(rng, 25, d=2)
    data = DesignData(y, ev, x)
    path = tmp_path / "d.csv"
    save_design_csv(str(path), data, "t", "e", ("a", "b"))
    back = load_csv(str(path), "t", "e", ("a", "b"))
    np.testing.assert_array_equal(back.time, data.time)
    np.testing.assert_array_equal(back.event, data.event)
    np.testing.assert_array_equal(back.covariates, data.covariates)


def test_load_csv_toy_values(tmp_path):
    path = tmp_path / "toy.csv"
    write_csv(path, ["t", "e", "x"], [[1.5, 1, 0.25], [2.5, 0, -1.0], [3.0, 1, 2.0]])
    data = load_csv(str(path), "t", "e", ("x",))
    np.testing.assert_array_equal(data.time, [1.5, 2.5, 3.0])
    np.testing.assert_array_equal(data.event, [True, False, True])
    np.testing.assert_array_equal(data.covariates[:, 0], [0.25, -1.0, 2.0])


def test_load_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    write_csv(path, ["t", "e", "x"], [[1.0, 2, 0.5]])
    with pytest.raises(DataError, match="row 2.*'e'"):
        load_csv(str(path), "t", "e", ("x",))

    write_csv(path, ["t", "e", "x"], [[1.0, 1, "abc"]])
    with pytest.raises(DataError, match="row 2, column 'x'"):
        load_csv(str(path), "t", "e", ("x",))

    write_csv(path, ["t", "e"], [[1.0, 1]])
    with pytest.raises(DataError, match="missing column"):
        load_csv(str(path), "t", "e", ("x",))

    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(DataError, match="empty"):
        load_csv(str(tmp_path / "empty.csv"), "t", "e", ("x",))

    write_csv(path, ["t", "e", "x"], [[-1.0, 1, 0.5]])
    with pytest.raises(DataError, match="positive"):
        load_csv(str(path), "t", "e", ("x",), log_time=True)


# ---------------------------------------------------------------- fit


def test_cmd_fit_exact_linear(tmp_path, linear_csv, capsys):
    out = tmp_path / "fit.csv"
    code = main(
        [
            "fit",
            "--input", linear_csv,
            "--response", "time",
            "--event", "status",
            "--covariates", "x1,x2",
            "--output", str(out),
        ]
    )
    assert code == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["term", "estimate", "bootstrap_se"]
    est = {r[0]: float(r[1]) for r in rows[1:]}
    assert est["intercept"] == pytest.approx(2.0, abs=1e-5)
    assert est["x1"] == pytest.approx(1.0, abs=1e-5)
    assert est["x2"] == pytest.approx(1.0, abs=1e-5)
    km = tmp_path / "fit_km.csv"
    assert km.exists()
    kmrows = list(csv.reader(km.open()))
    assert kmrows[0] == ["t", "cdf", "survival"]
    assert float(kmrows[-1][1]) == 1.0


def test_cmd_fit_with_bootstrap(tmp_path, linear_csv):
    out = tmp_path / "fit.csv"
    code = main(
        [
            "fit",
            "--input", linear_csv,
            "--response", "time",
            "--event", "status",
            "--covariates", "x1,x2",
            "--output", str(out),
            "--boot", "10",
            "--seed", "4",
        ]
    )
    assert code == EXIT_OK
    rows = list(csv.reader(out.open()))
    ses = [float(r[2]) for r in rows[1:]]
    assert all(np.isfinite(ses))


def test_cmd_fit_all_censored_exits_fit_error(tmp_path, capsys):
    path = tmp_path / "cens.csv"
    write_csv(path, ["t", "e", "x"], [[1.0, 0, 0.1], [2.0, 0, 0.5], [3.0, 0, 0.9]])
    code = main(
        ["fit", "--input", str(path), "--response", "t", "--event", "e",
         "--covariates", "x", "--output", str(tmp_path / "o.csv")]
    )
    assert code == EXIT_FIT
    err = capsys.readouterr().err
    assert "no events" in err or "degenerate KM" in err


def test_cmd_fit_missing_column_exits_data_error(tmp_path, linear_csv):
    code = main(
        ["fit", "--input", linear_csv, "--response", "time", "--event", "status",
         "--covariates", "nope", "--output", str(tmp_path / "o.csv")]
    )
    assert code == EXIT_DATA


def test_cli_unknown_flag_exits_config_error(linear_csv):
    assert main(["fit", "--bogus", "1"]) == EXIT_CONFIG
    assert main(["nonsense"]) == EXIT_CONFIG


def test_cmd_fit_byte_identical_reruns(tmp_path, linear_csv):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    args = ["fit", "--input", linear_csv, "--response", "time", "--event", "status",
            "--covariates", "x1,x2", "--boot", "8", "--seed", "11"]
    assert main(args + ["--output", str(out1)]) == EXIT_OK
    assert main(args + ["--output", str(out2)]) == EXIT_OK
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "a_km.csv").read_bytes() == (tmp_path / "b_km.csv").read_bytes()


# ---------------------------------------------------------------- predict-cv


def test_cmd_predict_cv_exact(tmp_path, capsys):
    rows = [[2.0 + x, 1, x] for x in (-1.0, 0.0, 1.0, 2.0)]
    path = tmp_path / "l.csv"
    write_csv(path, ["t", "e", "x"], rows)
    out = tmp_path / "cv.csv"
    code = main(
        ["predict-cv", "--input", str(path), "--response", "t", "--event", "e",
         "--covariates", "x", "--output", str(out)]
    )
    assert code == EXIT_OK
    got = list(csv.reader(out.open()))
    assert got[0] == ["subject", "observed", "event", "predicted", "fold_failed"]
    for row in got[1:]:
        assert float(row[3]) == pytest.approx(float(row[1]), abs=1e-6)
        assert row[4] == "0"
    assert "MSE" in capsys.readouterr().out


def test_cmd_predict_cv_duplicated_row_is_influence_free(tmp_path):
    # a duplicated subject: dropping one copy leaves the fit unchanged, so
    # its held-out prediction equals the full-fit prediction
    rng = np.random.default_rng(8)
    xs = rng.normal(size=12)
    rows = [[1.0 + 0.5 * x + 0.01 * rng.normal(), 1, x] for x in xs]
    rows.append(list(rows[0]))  # duplicate the first subject
    path = tmp_path / "dup.csv"
    write_csv(path, ["t", "e", "x"], rows)
    out = tmp_path / "cv.csv"
    assert main(
        ["predict-cv", "--input", str(path), "--response", "t", "--event", "e",
         "--covariates", "x", "--output", str(out)]
    ) == EXIT_OK
    got = list(csv.reader(out.open()))
    first, last = got[1], got[-1]
    assert float(first[3]) == pytest.approx(float(last[3]), abs=1e-9)


def test_cmd_predict_cv_needs_three_subjects(tmp_path):
    path = tmp_path / "two.csv"
    write_csv(path, ["t", "e", "x"], [[1.0, 1, 0.0], [2.0, 1, 1.0]])
    code = main(
        ["predict-cv", "--input", str(path), "--response", "t", "--event", "e",
         "--covariates", "x", "--output", str(tmp_path / "o.csv")]
    )
    assert code == EXIT_DATA


# ---------------------------------------------------------------- simulate


def test_cmd_simulate_custom_scenario(tmp_path, capsys):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "study = estimation\nerror = normal(0.5)\nx2 = normal(0,1)\n"
        "tau = 4\nn = 50\nreps = 3\nseed = 6\n"
    )
    out = tmp_path / "table.csv"
    code = main(["simulate", "--scenario", str(cfg), "--output", str(out)])
    assert code == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["parameter", "mean", "sd", "censoring_rate", "n_replications", "n_failed"]
    assert [r[0] for r in rows[1:]] == ["alpha", "beta1", "beta2"]


def test_cmd_simulate_single_replicate_blank_sd(tmp_path):
    cfg = tmp_path / "one.cfg"
    cfg.write_text(
        "study = estimation\nerror = normal(0.5)\nx2 = normal(0,1)\n"
        "tau = 4\nn = 50\nreps = 1\nseed = 6\n"
    )
    out = tmp_path / "table.csv"
    assert main(["simulate", "--scenario", str(cfg), "--output", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[1][2] == ""


def test_cmd_simulate_bundled_config_with_overrides(tmp_path):
    out = tmp_path / "cell.csv"
    code = main(
        ["simulate", "--scenario", "table1_a_tau4_n400", "--output", str(out),
         "--reps", "2"]
    )
    assert code == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[1][0] == "alpha"
    assert rows[1][4] == "2"


def test_cmd_simulate_prediction_scenario(tmp_path):
    cfg = tmp_path / "pred.cfg"
    cfg.write_text(
        "study = prediction\nx = normal(0,1)\ncens = uniform(-3,3)\ntau = 0\n"
        "n = 80\nreps = 4\nseed = 6\n"
    )
    out = tmp_path / "pred.csv"
    assert main(["simulate", "--scenario", str(cfg), "--output", str(out)]) == EXIT_OK
    rows = list(csv.reader(out.open()))
    assert rows[0][0] == "model"
    assert [r[0] for r in rows[1:]] == ["linear", "cox"]
    assert all(float(r[1]) > 0 for r in rows[1:])  # ratios filled


def test_cmd_simulate_unknown_scenario_exits_config(tmp_path):
    code = main(
        ["simulate", "--scenario", "no_such_cell", "--output", str(tmp_path / "x.csv")]
    )
    assert code == EXIT_CONFIG


def test_cmd_simulate_byte_identical(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "study = estimation\nerror = laplace(0.5)\nx2 = uniform(-2,2)\n"
        "tau = 4\nn = 40\nreps = 3\nseed = 16\n"
    )
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--scenario", str(cfg), "--output", str(a)]) == EXIT_OK
    assert main(["simulate", "--scenario", str(cfg), "--output", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------- km-check


def test_cmd_km_check_uncensored(tmp_path, capsys):
    rng = np.random.default_rng(10)
    rows = [[1.0 + 0.5 * x + 0.1 * rng.normal(), 1, x] for x in rng.normal(size=100)]
    path = tmp_path / "u.csv"
    write_csv(path, ["t", "e", "x"], rows)
    code = main(
        ["km-check", "--input", str(path), "--response", "t", "--event", "e",
         "--covariates", "x"]
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "0.01" in out and "adequate" in out and "NOT" not in out


def test_cmd_km_check_heavy_censoring(tmp_path, capsys):
    rows = [[0.5, 1, 0.0], [0.6, 1, 0.4], [1.0, 0, 0.2], [1.0, 0, 0.9],
            [1.0, 0, 0.6], [1.0, 0, 0.1], [1.0, 0, 0.8], [1.0, 0, 0.3]]
    path = tmp_path / "h.csv"
    write_csv(path, ["t", "e", "x"], rows)
    code = main(
        ["km-check", "--input", str(path), "--response", "t", "--event", "e",
         "--covariates", "x"]
    )
    assert code == EXIT_OK
    assert "NOT adequate" in capsys.readouterr().out


# ---------------------------------------------------------------- bundled configs


def test_bundled_configs_cover_both_tables():
    names = sorted(p.name for p in CONFIG_DIR.iterdir() if p.name.endswith(".cfg"))
    assert len(names) == 90
    t1 = [n for n in names if n.startswith("table1_")]
    t2 = [n for n in names if n.startswith("table2_")]
    assert len(t1) == 60 and len(t2) == 30
    # every file parses into a valid scenario; grids are complete
    seen_est = set()
    seen_pred = set()
    for name in names:
        sc = parse_scenario_text(CONFIG_DIR.joinpath(name).read_text())
        assert sc.replications == 1000
        if sc.study == "estimation":
            seen_est.add(
                (sc.error.kind, sc.covariates[1].kind, sc.covariates[1].params,
                 sc.censoring.tau, sc.n)
            )
        else:
            tau = None if sc.censoring is None else sc.censoring.tau
            seen_pred.add((sc.covariates[0].params, tau, sc.n))
    assert len(seen_est) == 60
    assert len(seen_pred) == 30
