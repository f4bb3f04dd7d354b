"""CSV ingestion, the command-line interface, and report rendering.

File conventions (all CSV, fixed headers, ISO-8601 dates):

* prices:     ``date,TICK1,TICK2,...`` one row per trading day
* allocation: ``ticker,weight`` with decimal weights summing to 1
* in-sample report:     ``model,exp_return,std_dev,max_drawdown,n_stocks,time_s``
* out-of-sample report: ``model,period_return,daily_return,std_dev,max_drawdown``
* sensitivity report:   ``model,avg_abs_alloc_change``

Metric tables are rendered in percent; allocation weights stay decimal. Every
command writes a ``manifest.json`` capturing the resolved configuration, the
SHA-256 of each input file, and the produced artifacts, so a run can be
reproduced from the manifest alone (wall-clock ``time_s`` columns are the one
run-dependent quantity). Floats are written with 17 significant digits, enough
for an exact round-trip through the readers here.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analytics import (
    SplitSpec,
    compute_metrics,
    lambda_grid,
    lambda_sweep,
    portfolio_series,
    sensitivity_run,
    train_test_split,
)
from .core import (
    Allocation,
    DataError,
    ModelConfig,
    PriceMatrix,
    SolveStatus,
)
from .estimation import PerturbationConfig, asset_stats, compute_simple_returns
from .models import SOLVERS

log = logging.getLogger(__name__)

MODEL_ALIASES = {
    "markowitz": "markowitz",
    "reverse": "reverse_markowitz",
    "reverse-markowitz": "reverse_markowitz",
    "simultaneous": "simultaneous",
    "mad": "mad",
    "md": "md",
    "md-milp": "md_milp",
}
BACKTEST_ALL = ("markowitz", "reverse_markowitz", "simultaneous", "md", "md_milp")

TABLE1_HEADER = "model,exp_return,std_dev,max_drawdown,n_stocks,time_s"
TABLE2_HEADER = "model,period_return,daily_return,std_dev,max_drawdown"
TABLE3_HEADER = "model,avg_abs_alloc_change"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


# ---------------------------------------------------------------------------
# price file I/O
# ---------------------------------------------------------------------------

def ingest_prices(path: str | Path) -> PriceMatrix:
    """Load a prices CSV, dropping tickers that have any missing value.

    Rows are sorted by date after loading. Raises on malformed headers,
    non-numeric cells, duplicate dates, nonpositive prices, or fewer than two
    usable rows; missing (empty) cells only cost that ticker its column, with
    a logged warning counting the drops.
    """
    matrix, dropped = _ingest_prices_detail(Path(path))
    if dropped:
        log.warning("dropped %d ticker(s) with missing values: %s",
                    len(dropped), ",".join(dropped))
    return matrix


def _ingest_prices_detail(path: Path) -> tuple[PriceMatrix, list[str]]:
    import csv as _csv
    import datetime as _dt

    with path.open(newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "date":
            raise DataError(f"{path}: header must be 'date,TICKER1,...'")
        tickers = [h.strip() for h in header[1:]]
        if any(not t for t in tickers) or len(set(tickers)) != len(tickers):
            raise DataError(f"{path}: ticker names must be nonempty and unique")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(tickers) + 1:
                raise DataError(f"{path}:{lineno}: expected {len(tickers) + 1} cells")
            try:
                _dt.date.fromisoformat(row[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
            values = []
            for ticker, cell in zip(tickers, row[1:]):
                cell = cell.strip()
                if cell == "":
                    values.append(np.nan)  # missing: drops the ticker later
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric price {cell!r} for {ticker}") from None
            rows.append((row[0], values))

    rows.sort(key=lambda r: r[0])
    dates = [r[0] for r in rows]
    if len(set(dates)) != len(dates):
        dupe = next(d for i, d in enumerate(dates) if d in dates[:i])
        raise DataError(f"{path}: duplicate date {dupe}")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 rows of prices")
    data = np.array([r[1] for r in rows], dtype=float).T  # tickers x days
    keep = ~np.isnan(data).any(axis=1)
    dropped = [t for t, k in zip(tickers, keep) if not k]
    if not keep.any():
        raise DataError(f"{path}: every ticker has missing values")
    matrix = PriceMatrix(
        tuple(t for t, k in zip(tickers, keep) if k), tuple(dates), data[keep])
    return matrix, dropped


def write_prices_csv(matrix: PriceMatrix, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("date," + ",".join(matrix.tickers) + "\n")
        for j, date in enumerate(matrix.dates):
            fh.write(date + "," + ",".join(_fmt(v) for v in matrix.prices[:, j]) + "\n")


def write_allocation_csv(tickers, allocation: Allocation, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write("ticker,weight\n")
        for ticker, weight in zip(tickers, allocation.weights):
            fh.write(f"{ticker},{_fmt(weight)}\n")


def read_allocation_csv(path: str | Path) -> tuple[tuple[str, ...], Allocation]:
    import csv as _csv
    with Path(path).open(newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if header != ["ticker", "weight"]:
            raise DataError(f"{path}: expected header 'ticker,weight'")
        tickers, weights = [], []
        for row in reader:
            tickers.append(row[0])
            weights.append(float(row[1]))
    return tuple(tickers), Allocation(np.array(weights))


# ---------------------------------------------------------------------------
# run configuration and manifest
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Everything a command needs, serializable into the run manifest."""

    command: str
    prices: str
    output_dir: str
    models: tuple[str, ...] = BACKTEST_ALL
    rho: float | None = None
    sigma0: float | None = None
    lam: float = 0.0
    mu_l1: float = 0.0
    cap: float | None = None
    min_alloc: float = 0.05
    c: float = 1000.0
    seed: int = 0
    grid_min: float = 1e-3
    grid_max: float = 1e4
    grid_n: int = 100
    grid_spacing: str = "log"
    train_end: str | None = None
    test_end: str | None = None
    out_format: str = "csv"
    threads: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["models"] = tuple(d.get("models", BACKTEST_ALL))
        return cls(**d)

    def model_config(self) -> ModelConfig:
        return ModelConfig(rho=self.rho, sigma0=self.sigma0, lam=self.lam,
                           mu_l1=self.mu_l1, cap=self.cap, min_alloc=self.min_alloc)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(cfg: RunConfig, outputs: list[str]) -> None:
    from . import __version__

    manifest = {
        "tool": f"portopt {__version__}",
        "command": cfg.command,
        "config": cfg.to_dict(),
        "inputs": {cfg.prices: _sha256(Path(cfg.prices))},
        "outputs": sorted(outputs),
    }
    out = Path(cfg.output_dir) / "manifest.json"
    out.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def run_from_manifest(path: str | Path) -> int:
    """Re-execute the run recorded in a manifest (reproducibility hook)."""
    manifest = json.loads(Path(path).read_text())
    return run_command(RunConfig.from_dict(manifest["config"]))


# ---------------------------------------------------------------------------
# table rendering
# ---------------------------------------------------------------------------

def _write_table(path: Path, header: str, rows: list[list[str]], out_format: str) -> list[str]:
    written = [str(path)]
    with path.open("w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    if out_format == "markdown":
        md = path.with_suffix(".md")
        md.write_text(render_markdown(header.split(","), rows))
        written.append(str(md))
    return written


def render_markdown(columns: list[str], rows: list[list[str]]) -> str:
    lines = ["| " + " | ".join(columns) + " |",
             "| " + " | ".join("---" for _ in columns) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_command(cfg: RunConfig) -> int:
    """Dispatch one run; returns the process exit status, artifacts on disk."""
    import datetime as _dt
    for label, value in (("--train-end", cfg.train_end), ("--test-end", cfg.test_end)):
        if value is not None:
            try:
                _dt.date.fromisoformat(value)
            except ValueError:
                raise DataError(f"{label} must be an ISO-8601 date, got {value!r}") from None
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = {
        "ingest": _cmd_ingest,
        "solve": _cmd_solve,
        "backtest": _cmd_backtest,
        "sweep-lambda": _cmd_sweep,
        "sensitivity": _cmd_sensitivity,
    }.get(cfg.command)
    if handler is None:
        raise DataError(f"unknown command {cfg.command!r}")
    outputs = handler(cfg, out_dir)
    _write_manifest(cfg, outputs)
    return 0


def _load_returns(cfg: RunConfig):
    prices = ingest_prices(cfg.prices)
    return prices, compute_simple_returns(prices)


def _split_spec(cfg: RunConfig, returns) -> SplitSpec:
    if cfg.train_end is None or cfg.test_end is None:
        raise DataError("backtest requires --train-end and --test-end")
    first, last = returns.dates[0], returns.dates[-1]
    if not first <= cfg.train_end < cfg.test_end:
        raise DataError("need first date <= train_end < test_end")
    after_train = next((d for d in returns.dates if d > cfg.train_end), None)
    if after_train is None:
        raise DataError("no data after train_end")
    return SplitSpec(first, cfg.train_end, after_train, min(cfg.test_end, last))


def _resolve_models(cfg: RunConfig) -> list[str]:
    tags = []
    for name in cfg.models:
        tag = MODEL_ALIASES.get(name, name)
        if tag not in SOLVERS:
            raise DataError(f"unknown model {name!r}")
        tags.append(tag)
    return tags


def _cmd_ingest(cfg: RunConfig, out_dir: Path) -> list[str]:
    matrix, dropped = _ingest_prices_detail(Path(cfg.prices))
    out = out_dir / "prices_clean.csv"
    write_prices_csv(matrix, out)
    summary = out_dir / "ingest_summary.csv"
    with summary.open("w") as fh:
        fh.write("n_tickers,n_days,n_dropped\n")
        fh.write(f"{matrix.n_assets},{matrix.n_days},{len(dropped)}\n")
    print(f"ingested {matrix.n_assets} tickers x {matrix.n_days} days "
          f"({len(dropped)} dropped)")
    return [str(out), str(summary)]


def _cmd_solve(cfg: RunConfig, out_dir: Path) -> list[str]:
    if len(cfg.models) != 1:
        raise DataError("solve takes exactly one --model")
    tag = _resolve_models(cfg)[0]
    prices, returns = _load_returns(cfg)
    if cfg.train_end is not None:
        dates = [d for d in returns.dates if d <= cfg.train_end]
        if not dates:
            raise DataError("train_end precedes all data")
        returns = type(returns)(returns.tickers, tuple(dates),
                                returns.returns[:, :len(dates)])
    stats = asset_stats(returns)
    report = SOLVERS[tag](returns, stats, cfg.model_config())
    outputs = []
    report_path = out_dir / "report.csv"
    with report_path.open("w") as fh:
        fh.write("model,objective,status,iterations,time_s\n")
        objective = _fmt(report.objective) if report.objective is not None else ""
        fh.write(f"{tag},{objective},{report.status.value},{report.iterations},"
                 f"{report.wall_time:.6f}\n")
    outputs.append(str(report_path))
    if report.status is SolveStatus.OPTIMAL:
        alloc_path = out_dir / "allocation.csv"
        write_allocation_csv(returns.tickers, report.allocation, alloc_path)
        outputs.append(str(alloc_path))
        print(f"{tag}: objective {report.objective!r}, "
              f"{report.allocation.n_positions} positions")
    else:
        print(f"{tag}: {report.status.value}")
    return outputs


def _cmd_backtest(cfg: RunConfig, out_dir: Path) -> list[str]:
    prices, returns = _load_returns(cfg)
    spec = _split_spec(cfg, returns)
    train, test = train_test_split(returns, spec)
    stats = asset_stats(train)
    model_cfg = cfg.model_config()
    tags = _resolve_models(cfg)

    rows1, rows2 = [], []
    for tag in tags:
        report = SOLVERS[tag](train, stats, model_cfg)
        if report.status is not SolveStatus.OPTIMAL:
            rows1.append([tag, report.status.value, "", "", "", f"{report.wall_time:.6f}"])
            rows2.append([tag, report.status.value, "", "", ""])
            continue
        m_in = compute_metrics(portfolio_series(train, report.allocation), report.allocation)
        m_out = compute_metrics(portfolio_series(test, report.allocation), report.allocation)
        rows1.append([
            tag, _fmt(m_in.mean_daily_return * 100), _fmt(m_in.std_daily * 100),
            _fmt(m_in.max_drawdown * 100), str(m_in.n_positions),
            f"{report.wall_time:.6f}",
        ])
        rows2.append([
            tag, _fmt(m_out.cumulative_return * 100), _fmt(m_out.mean_daily_return * 100),
            _fmt(m_out.std_daily * 100), _fmt(m_out.max_drawdown * 100),
        ])
    outputs = _write_table(out_dir / "insample.csv", TABLE1_HEADER, rows1, cfg.out_format)
    outputs += _write_table(out_dir / "outsample.csv", TABLE2_HEADER, rows2, cfg.out_format)
    print(f"backtest: {len(tags)} models, train {train.n_days} days, test {test.n_days} days")
    return outputs


def _cmd_sweep(cfg: RunConfig, out_dir: Path) -> list[str]:
    prices, returns = _load_returns(cfg)
    if cfg.train_end is not None:
        dates = [d for d in returns.dates if d <= cfg.train_end]
        returns = type(returns)(returns.tickers, tuple(dates),
                                returns.returns[:, :len(dates)])
    stats = asset_stats(returns)
    grid = lambda_grid(cfg.grid_min, cfg.grid_max, cfg.grid_n, cfg.grid_spacing)
    sweep = lambda_sweep(stats, grid, cap=cfg.cap, threads=cfg.threads)
    rows = [
        [_fmt(lam), _fmt(s) if np.isfinite(s) else "", _fmt(r) if np.isfinite(r) else "",
         status, _fmt(d) if np.isfinite(d) else ""]
        for lam, s, r, status, d in zip(sweep.lambdas, sweep.std_pct, sweep.return_pct,
                                        sweep.statuses, sweep.distances)
    ]
    outputs = _write_table(out_dir / "frontier.csv",
                           "lambda,std_pct,return_pct,status,distance", rows, cfg.out_format)
    summary_rows = [[_fmt(sweep.chosen_lambda), _fmt(sweep.ideal_point[0]),
                     _fmt(sweep.ideal_point[1])]]
    outputs += _write_table(out_dir / "sweep_summary.csv",
                            "chosen_lambda,ideal_std_pct,ideal_return_pct",
                            summary_rows, cfg.out_format)
    print(f"sweep: chosen lambda {sweep.chosen_lambda!r} "
          f"(ideal point {sweep.ideal_point[0]:.4f}%, {sweep.ideal_point[1]:.4f}%)")
    return outputs


def _cmd_sensitivity(cfg: RunConfig, out_dir: Path) -> list[str]:
    prices, returns = _load_returns(cfg)
    if cfg.train_end is not None:
        dates = [d for d in returns.dates if d <= cfg.train_end]
        returns = type(returns)(returns.tickers, tuple(dates),
                                returns.returns[:, :len(dates)])
    tags = _resolve_models(cfg)
    model_cfg = cfg.model_config()
    report = sensitivity_run(returns, {tag: model_cfg for tag in tags},
                             PerturbationConfig(c=cfg.c, seed=cfg.seed),
                             threads=cfg.threads)
    rows = [[row.model,
             _fmt(row.alloc_change_pct) if row.alloc_change_pct is not None else row.status]
            for row in report.rows]
    outputs = _write_table(out_dir / "sensitivity.csv", TABLE3_HEADER, rows, cfg.out_format)
    cov_rows = [[_fmt(report.cov_avg_abs_diff), _fmt(report.cov_relative_change)]]
    outputs += _write_table(out_dir / "covariance_change.csv",
                            "avg_abs_diff,relative_change", cov_rows, cfg.out_format)
    print(f"sensitivity: covariance relative change "
          f"{report.cov_relative_change * 100:.2f}%")
    return outputs


def _cmd_report(args) -> int:
    path = Path(args.input)
    lines = path.read_text().strip().splitlines()
    if not lines:
        raise DataError(f"{path}: empty report")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    rendered = render_markdown(header, rows)
    if args.output:
        Path(args.output).write_text(rendered)
    else:
        sys.stdout.write(rendered)
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="portopt",
        description="Portfolio optimization toolkit: six models, backtesting, "
                    "penalty sweep, and perturbation sensitivity analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command",
                                help="run `portopt <command> -h` for details")

    def add_common(p, needs_models=False):
        p.add_argument("prices", help="prices CSV (date,TICK1,TICK2,...)")
        p.add_argument("--output-dir", default="out", help="artifact directory")
        p.add_argument("--rho", type=float, default=None,
                       help="minimum daily expected return (decimal)")
        p.add_argument("--sigma0", type=float, default=None,
                       help="maximum daily standard deviation (decimal)")
        p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                       help="risk-penalty weight for the simultaneous model")
        p.add_argument("--cap", type=float, default=None,
                       help="per-asset ceiling (default 0.5 for drawdown models, 1 otherwise)")
        p.add_argument("--min-alloc", type=float, default=0.05,
                       help="minimum positive weight (drawdown MILP)")
        p.add_argument("--mu-l1", type=float, default=0.0, help="L1 penalty (0 disables)")
        p.add_argument("--c", type=float, default=1000.0, help="perturbation scale divisor")
        p.add_argument("--seed", type=int, default=0, help="perturbation RNG seed")
        p.add_argument("--grid-min", type=float, default=1e-3)
        p.add_argument("--grid-max", type=float, default=1e4)
        p.add_argument("--grid-n", type=int, default=100)
        p.add_argument("--grid-spacing", choices=("log", "linear"), default="log")
        p.add_argument("--train-end", default=None, help="last training date, inclusive")
        p.add_argument("--test-end", default=None, help="last test date, inclusive")
        p.add_argument("--format", dest="out_format", choices=("csv", "markdown"),
                       default="csv")
        p.add_argument("--threads", type=int, default=1)
        if needs_models:
            p.add_argument("--models", default="all",
                           help="comma list of models, or 'all' for the five surveyed")

    p = sub.add_parser("ingest", help="validate and normalize a prices CSV")
    add_common(p)

    p = sub.add_parser("solve", help="solve one model and write its allocation")
    add_common(p)
    p.add_argument("--model", required=True, choices=sorted(MODEL_ALIASES),
                   help="which model to solve")

    p = sub.add_parser("backtest", help="train/test split performance tables")
    add_common(p, needs_models=True)

    p = sub.add_parser("sweep-lambda", help="trace the penalty frontier and pick lambda")
    add_common(p)

    p = sub.add_parser("sensitivity", help="perturbation study of allocations")
    add_common(p, needs_models=True)

    p = sub.add_parser("report", help="render a report CSV as markdown")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    return parser


def config_from_args(args) -> RunConfig:
    if args.command == "solve":
        models = (args.model,)
    elif getattr(args, "models", "all") == "all":
        models = BACKTEST_ALL
    else:
        models = tuple(m.strip() for m in args.models.split(",") if m.strip())
    return RunConfig(
        command=args.command, prices=args.prices, output_dir=args.output_dir,
        models=models, rho=args.rho, sigma0=args.sigma0, lam=args.lam,
        mu_l1=args.mu_l1, cap=args.cap, min_alloc=args.min_alloc, c=args.c,
        seed=args.seed, grid_min=args.grid_min, grid_max=args.grid_max,
        grid_n=args.grid_n, grid_spacing=args.grid_spacing,
        train_end=args.train_end, test_end=args.test_end,
        out_format=args.out_format, threads=args.threads,
    )


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return _cmd_report(args)
        return run_command(config_from_args(args))
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
