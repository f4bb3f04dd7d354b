import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from portopt.cli_io import (
    RunConfig,
    ingest_prices,
    main,
    read_allocation_csv,
    render_markdown,
    run_command,
    run_from_manifest,
    write_prices_csv,
)
from portopt.core import DataError, PriceMatrix, validate_allocation

from conftest import FIXTURE_PATH


def write_tiny_prices(path: Path, n=10, days=30, seed=5, missing=None):
    rng = np.random.default_rng(seed)
    import datetime as dt
    dates = []
    day = dt.date(2021, 1, 4)
    while len(dates) < days:
        if day.weekday() < 5:
            dates.append(day.isoformat())
        day += dt.timedelta(days=1)
    rets = rng.normal(0.002, 0.012, (n, days))
    prices = 50 * np.cumprod(1 + rets, axis=1)
    with path.open("w") as fh:
        fh.write("date," + ",".join(f"S{i:02d}" for i in range(n)) + "\n")
        for j, d in enumerate(dates):
            cells = []
            for i in range(n):
                if missing and (i, j) in missing:
                    cells.append("")
                else:
                    cells.append(f"{prices[i, j]:.6f}")
            fh.write(d + "," + ",".join(cells) + "\n")
    return dates


class TestIngest:
    def test_minimal_two_day_file(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,XY\n2020-01-02,100.0\n2020-01-03,101.5\n")
        matrix = ingest_prices(f)
        assert matrix.n_assets == 1 and matrix.n_days == 2
        assert matrix.prices[0, 1] == pytest.approx(101.5)

    def test_blank_cell_drops_ticker(self, tmp_path, caplog):
        f = tmp_path / "p.csv"
        write_tiny_prices(f, n=4, days=5, missing={(2, 3)})
        with caplog.at_level("WARNING"):
            matrix = ingest_prices(f)
        assert matrix.n_assets == 3
        assert "S02" in caplog.text
        assert "1 ticker" in caplog.text

    def test_rows_sorted_by_date(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,A\n2020-01-03,101.0\n2020-01-02,100.0\n")
        matrix = ingest_prices(f)
        assert matrix.dates == ("2020-01-02", "2020-01-03")
        assert matrix.prices[0, 0] == pytest.approx(100.0)

    def test_malformed_header(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("time,A\n2020-01-02,1.0\n2020-01-03,1.0\n")
        with pytest.raises(DataError):
            ingest_prices(f)

    def test_non_numeric_cell(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,A\n2020-01-02,abc\n2020-01-03,1.0\n")
        with pytest.raises(DataError):
            ingest_prices(f)

    def test_duplicate_date(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,A\n2020-01-02,1.0\n2020-01-02,1.1\n")
        with pytest.raises(DataError):
            ingest_prices(f)

    def test_too_few_rows(self, tmp_path):
        f = tmp_path / "p.csv"
        f.write_text("date,A\n2020-01-02,1.0\n")
        with pytest.raises(DataError):
            ingest_prices(f)

    def test_fixture_dimensions(self, fixture_prices):
        assert fixture_prices.n_assets == 390
        assert fixture_prices.n_days == 126
        assert fixture_prices.dates[0] == "2020-02-03"
        assert fixture_prices.dates[-1] == "2020-07-31"

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        matrix = PriceMatrix(
            ("A", "B"), ("2020-01-02", "2020-01-03", "2020-01-06"),
            rng.uniform(10, 500, (2, 3)))
        out = tmp_path / "round.csv"
        write_prices_csv(matrix, out)
        back = ingest_prices(out)
        assert back.tickers == matrix.tickers
        assert back.dates == matrix.dates
        assert np.array_equal(back.prices, matrix.prices)


class TestCommands:
    def test_solve_writes_valid_allocation(self, tmp_path):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices)
        out = tmp_path / "out"
        code = run_command(RunConfig(command="solve", prices=str(prices),
                                     output_dir=str(out), models=("md",), rho=0.001))
        assert code == 0
        tickers, alloc = read_allocation_csv(out / "allocation.csv")
        assert validate_allocation(alloc.weights, cap=0.5).ok
        report = (out / "report.csv").read_text().splitlines()
        assert report[0] == "model,objective,status,iterations,time_s"
        assert report[1].startswith("md,")
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert str(prices) in manifest["inputs"]

    def test_solve_md_on_bundled_fixture(self, tmp_path):
        out = tmp_path / "fix"
        code = main(["solve", str(FIXTURE_PATH), "--model", "md", "--rho", "0.001",
                     "--output-dir", str(out)])
        assert code == 0
        tickers, alloc = read_allocation_csv(out / "allocation.csv")
        assert len(tickers) == 390
        assert validate_allocation(alloc.weights, cap=0.5).ok
        assert alloc.weights.sum() == pytest.approx(1.0, abs=1e-8)

    def test_backtest_table_shapes(self, tmp_path):
        prices = tmp_path / "p.csv"
        dates = write_tiny_prices(prices, days=40)
        out = tmp_path / "bt"
        cfg = RunConfig(command="backtest", prices=str(prices), output_dir=str(out),
                        rho=0.0005, sigma0=0.02, lam=1.0,
                        train_end=dates[19], test_end=dates[-1])
        assert run_command(cfg) == 0
        table1 = (out / "insample.csv").read_text().splitlines()
        table2 = (out / "outsample.csv").read_text().splitlines()
        assert table1[0] == "model,exp_return,std_dev,max_drawdown,n_stocks,time_s"
        assert table2[0] == "model,period_return,daily_return,std_dev,max_drawdown"
        assert len(table1) == 6 and len(table2) == 6
        models = [line.split(",")[0] for line in table1[1:]]
        assert models == ["markowitz", "reverse_markowitz", "simultaneous", "md", "md_milp"]

    def test_sweep_outputs(self, tmp_path):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices, n=6, days=25)
        out = tmp_path / "sw"
        cfg = RunConfig(command="sweep-lambda", prices=str(prices), output_dir=str(out),
                        grid_min=0.01, grid_max=100.0, grid_n=5)
        assert run_command(cfg) == 0
        frontier = (out / "frontier.csv").read_text().splitlines()
        assert frontier[0] == "lambda,std_pct,return_pct,status,distance"
        assert len(frontier) == 6
        summary = (out / "sweep_summary.csv").read_text().splitlines()
        assert summary[0] == "chosen_lambda,ideal_std_pct,ideal_return_pct"

    def test_sensitivity_deterministic_bytes(self, tmp_path):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices, n=8, days=30)
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            cfg = RunConfig(command="sensitivity", prices=str(prices),
                            output_dir=str(out), models=("md", "md_milp"),
                            rho=0.0005, seed=7, c=1000.0)
            assert run_command(cfg) == 0
            outs.append((out / "sensitivity.csv").read_bytes()
                        + (out / "covariance_change.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_manifest_rerun_reproduces_outputs(self, tmp_path):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices, n=6, days=20)
        out = tmp_path / "sens"
        cfg = RunConfig(command="sensitivity", prices=str(prices), output_dir=str(out),
                        models=("md",), rho=0.0005, seed=3)
        assert run_command(cfg) == 0
        first = (out / "sensitivity.csv").read_bytes()
        manifest_path = out / "manifest.json"
        manifest_bytes = manifest_path.read_bytes()
        shutil.rmtree(out)
        assert run_from_manifest_from_bytes(manifest_bytes, tmp_path) == 0
        assert (out / "sensitivity.csv").read_bytes() == first
        assert manifest_path.read_bytes() == manifest_bytes

    def test_markdown_format_writes_md(self, tmp_path):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices, n=5, days=15)
        out = tmp_path / "md"
        cfg = RunConfig(command="sensitivity", prices=str(prices), output_dir=str(out),
                        models=("md",), rho=0.0, out_format="markdown")
        assert run_command(cfg) == 0
        assert (out / "sensitivity.md").exists()
        assert (out / "sensitivity.md").read_text().startswith("| model |")


def run_from_manifest_from_bytes(manifest_bytes: bytes, tmp_path) -> int:
    path = tmp_path / "m.json"
    path.write_bytes(manifest_bytes)
    return run_from_manifest(path)


class TestMainEntry:
    def test_cli_solve_and_report(self, tmp_path, capsys):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices)
        out = tmp_path / "run"
        code = main(["solve", str(prices), "--model", "md", "--rho", "0.001",
                     "--output-dir", str(out)])
        assert code == 0
        code = main(["report", "--input", str(out / "report.csv")])
        assert code == 0
        captured = capsys.readouterr()
        assert "| model |" in captured.out

    def test_cli_error_is_one_line(self, tmp_path, capsys):
        code = main(["solve", str(tmp_path / "missing.csv"), "--model", "md",
                     "--output-dir", str(tmp_path / "o")])
        assert code == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error: ")

    def test_cli_model_aliases(self, tmp_path):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices)
        for alias, expect in (("md-milp", "md_milp"), ("reverse", "reverse_markowitz")):
            out = tmp_path / alias
            code = main(["solve", str(prices), "--model", alias, "--rho", "0.0005",
                         "--sigma0", "0.02", "--output-dir", str(out)])
            assert code == 0
            assert (out / "report.csv").read_text().splitlines()[1].startswith(expect)

    def test_cli_infeasible_rho_reports(self, tmp_path, capsys):
        prices = tmp_path / "p.csv"
        write_tiny_prices(prices)
        out = tmp_path / "inf"
        code = main(["solve", str(prices), "--model", "md", "--rho", "0.8",
                     "--output-dir", str(out)])
        assert code == 0
        assert not (out / "allocation.csv").exists()
        assert "Infeasible" in (out / "report.csv").read_text()


def test_render_markdown_shape():
    text = render_markdown(["a", "b"], [["1", "2"], ["3", "4"]])
    lines = text.splitlines()
    assert lines[0] == "| a | b |"
    assert lines[1] == "| --- | --- |"
    assert len(lines) == 4
