import subprocess
import sys

import numpy as np
import pytest

from lpweber.backtest import PriceRelativeSeries, write_price_relatives
from lpweber.cli import EXIT_INPUT, EXIT_MAXITER, EXIT_OK, EXIT_USAGE, main
from lpweber.core import write_instance_csv
from lpweber.experiments import (
    DEFAULT_GRID,
    SweepSpec,
    geometric_random_walk,
    price_window,
    run_cell,
    run_sweep,
    sweep_table,
)
from lpweber.solver import parse_result


@pytest.fixture
def triangle_csv(tmp_path):
    path = tmp_path / "tri.csv"
    write_instance_csv(path, [[0, 0], [1, 0], [0, 1]])
    return path


@pytest.fixture
def prices_csv(tmp_path):
    path = tmp_path / "rel.csv"
    write_price_relatives(path, PriceRelativeSeries(geometric_random_walk(np.random.default_rng(5), 100, 5)))
    return path


def grid_cells(table):
    return [c for line in table.splitlines()[1:] for c in line.split(",")[1:]]


class TestSolveCommand:
    def test_mean_start(self, triangle_csv, capsys):
        code = main(["solve", "--input", str(triangle_csv), "--p", "1", "--q", "1", "--y0-mode", "mean"])
        out = parse_result(capsys.readouterr().out)
        assert code == EXIT_OK
        np.testing.assert_allclose(out["minimizer"], [0, 0], atol=1e-4)
        assert out["cost"] == pytest.approx(2, abs=1e-4)

    def test_out_of_range_p(self, triangle_csv, capsys):
        assert main(["solve", "--input", str(triangle_csv), "--p", "2.0", "--q", "1"]) == EXIT_INPUT
        assert "p" in capsys.readouterr().err

    def test_start_at_data_point(self, tmp_path, capsys):
        path = tmp_path / "w.csv"
        write_instance_csv(path, [[0, 0], [1, 0], [0, 1]], [0.1, 1, 1])
        code = main(["solve", "--input", str(path), "--p", "1.5", "--q", "1", "--y0", "0,0",
                     "--trajectory"])
        out = parse_result(capsys.readouterr().out)
        assert code == EXIT_OK
        assert out["singular_hits"] >= 1
        assert out["trajectory"][0]["singular"] is True
        assert out["convergence_rate"] is None or 0 < out["convergence_rate"] < 1

    def test_first_point_mode(self, triangle_csv, capsys):
        assert main(["solve", "--input", str(triangle_csv), "--p", "1.5", "--q", "1.2",
                     "--y0-mode", "first-point"]) == EXIT_OK
        assert parse_result(capsys.readouterr().out)["singular_hits"] >= 1

    def test_iteration_limit(self, tmp_path, capsys):
        path = tmp_path / "r.csv"
        write_instance_csv(path, np.random.default_rng(0).normal(size=(6, 3)))
        code = main(["solve", "--input", str(path), "--p", "1.5", "--q", "1.5", "--max-iter", "1",
                     "--tol", "1e-15", "--tol2", "1e-16"])
        assert code == EXIT_MAXITER
        assert "MaxIterReached" in capsys.readouterr().out

    def test_usage_errors(self, triangle_csv, capsys):
        assert main(["solve", "--input", str(triangle_csv), "--p", "1", "--q", "1", "--rho", "3"]) == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            main(["solve", "--p", "1"])
        assert info.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            main(["solve", "--input", str(triangle_csv), "--p", "1", "--q", "1", "--y0", "a,b"])
        assert info.value.code == EXIT_USAGE

    def test_bad_file(self, tmp_path, capsys):
        assert main(["solve", "--input", str(tmp_path / "missing.csv"), "--p", "1", "--q", "1"]) == EXIT_INPUT
        bad = tmp_path / "bad.csv"
        bad.write_text("w,x1\n1,abc\n")
        assert main(["solve", "--input", str(bad), "--p", "1", "--q", "1"]) == EXIT_INPUT

    def test_module_entry_point(self, triangle_csv):
        proc = subprocess.run([sys.executable, "-m", "lpweber", "solve", "--input", str(triangle_csv),
                               "--p", "1", "--q", "1"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("status: ")


class TestBacktestCommand:
    def test_writes_outputs(self, prices_csv, tmp_path, capsys):
        prefix = tmp_path / "run"
        code = main(["backtest", "--prices", str(prices_csv), "--p", "1.5", "--q", "1",
                     "--out", str(prefix)])
        out = capsys.readouterr().out.splitlines()
        assert code == EXIT_OK
        assert out[0].startswith("CW: ") and len(out[0].split(".")[-1]) == 4
        assert out[1].startswith("SR: ")
        assert (tmp_path / "run_result.csv").exists() and (tmp_path / "run_summary.txt").exists()
        assert len((tmp_path / "run_result.csv").read_text().splitlines()) == 101

    def test_window_too_small(self, prices_csv, capsys):
        with pytest.raises(SystemExit) as info:
            main(["backtest", "--prices", str(prices_csv), "--p", "1.5", "--q", "1", "--window", "1"])
        assert info.value.code == EXIT_USAGE

    def test_missing_file(self, tmp_path, capsys):
        assert main(["backtest", "--prices", str(tmp_path / "nope.csv"), "--p", "1.5", "--q", "1",
                     "--out", str(tmp_path / "x")]) == EXIT_INPUT

    def test_baseline_params(self, prices_csv, tmp_path, capsys):
        assert main(["backtest", "--prices", str(prices_csv), "--p", "2", "--q", "1",
                     "--out", str(tmp_path / "b")]) == EXIT_OK


class TestSweepCommand:
    def test_rate_grid(self, capsys):
        assert main(["sweep", "--mode", "rate", "--reps", "50", "--seed", "11"]) == EXIT_OK
        cells = [c for c in grid_cells(capsys.readouterr().out) if c != "-"]
        assert len(cells) == 55
        assert all(0 < float(c.split("±")[0]) < 1 for c in cells)

    def test_singular_escape_grid(self, capsys):
        assert main(["sweep", "--mode", "singular-escape", "--reps", "20", "--seed", "3"]) == EXIT_OK
        cells = [c for c in grid_cells(capsys.readouterr().out) if c != "-"]
        assert len(cells) == 55
        assert all(float(c.split("±")[0]) >= 1 for c in cells)

    def test_dash_for_large_q(self, capsys):
        main(["sweep", "--mode", "convergence", "--reps", "2", "--p-grid", "1,1.5",
              "--q-grid", "1,1.7", "--dims", "10"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "q\\p,1,1.5"
        assert lines[2] == "1.7,-,-"
        assert lines[1].count("±") == 2

    def test_deterministic(self, tmp_path, capsys):
        args = ["sweep", "--mode", "convergence", "--reps", "3", "--p-grid", "1,1.3,1.9",
                "--q-grid", "1,1.3", "--dims", "10,20", "--metric", "iterations"]
        main(args + ["--out", str(tmp_path / "a.csv")])
        main(args + ["--out", str(tmp_path / "b.csv"), "--workers", "2"])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_backtest_mode(self, capsys):
        assert main(["sweep", "--mode", "backtest", "--p-grid", "1,1.5", "--q-grid", "1",
                     "--periods", "40", "--assets", "4"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "q,metric,1,1.5"
        assert lines[1].startswith("1,CW,") and lines[2].startswith("1,SR,")
        assert lines[3].startswith("baseline(1;2),CW,") and lines[4].startswith("baseline(1;2),SR,")

    def test_usage(self, capsys):
        assert main(["sweep", "--mode", "rate", "--reps", "0"]) == EXIT_USAGE
        with pytest.raises(SystemExit) as info:
            main(["sweep", "--mode", "bogus"])
        assert info.value.code == EXIT_USAGE


class TestExperiments:
    def test_price_window_shapes(self, rng):
        X = price_window(rng, m=5, d=7, integer=True)
        assert X.shape == (5, 7) and np.all(X == np.round(X)) and np.all(X > 0)

    def test_pairs_are_triangular(self):
        spec = SweepSpec()
        assert len(spec.pairs()) == 55 and all(q <= p for q, p in spec.pairs())
        assert spec.p_values == DEFAULT_GRID

    def test_cell_independent_of_grid(self):
        small = SweepSpec(p_values=(1.5,), q_values=(1.0,), repetitions=3, dims=(8,))
        large = SweepSpec(p_values=(1.0, 1.5, 1.8), q_values=(1.0, 1.2), repetitions=3, dims=(8,))
        a = run_sweep("rate", small)[(1.0, 1.5)]
        b = run_sweep("rate", large)[(1.0, 1.5)]
        assert a["costs"] == b["costs"] and a["conv_rate"] == b["conv_rate"]

    def test_cell_order(self):
        spec = SweepSpec(p_values=(1.0, 1.5), q_values=(1.0, 1.5), repetitions=1, dims=(5,))
        cells = run_sweep("rate", spec)
        assert list(cells) == [(1.0, 1.0), (1.0, 1.5), (1.5, 1.5)]
        assert sweep_table("rate", cells, spec).splitlines()[2].startswith("1.5,-,")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            run_cell("other", 1.0, 1.0, SweepSpec())
