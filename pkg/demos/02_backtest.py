"""Train on the first half of the window, hold the allocations through the
second half, and compare in-sample versus out-of-sample behavior.

Equivalent CLI:
    portopt backtest data/prices_2020h1.csv --rho 0.001 --sigma0 0.012 \
        --lambda 0.08 --train-end 2020-05-01 --test-end 2020-07-31 \
        --output-dir out/backtest
"""

from pathlib import Path

from portopt import ModelConfig, compute_simple_returns, asset_stats
from portopt.cli_io import ingest_prices
from portopt.analytics import SplitSpec, train_test_split, portfolio_series, compute_metrics
from portopt.models import SOLVERS

FIXTURE = Path(__file__).parent.parent / "data" / "prices_2020h1.csv"

prices = ingest_prices(FIXTURE)
returns = compute_simple_returns(prices)
split = SplitSpec(returns.dates[0], "2020-05-01", "2020-05-04", returns.dates[-1])
train, test = train_test_split(returns, split)
stats = asset_stats(train)
cfg = ModelConfig(rho=0.001, sigma0=0.012, lam=0.08)

print(f"train: {train.dates[0]} .. {train.dates[-1]} ({train.n_days} days)")
print(f"test:  {test.dates[0]} .. {test.dates[-1]} ({test.n_days} days)\n")

reports = {tag: SOLVERS[tag](train, stats, cfg)
           for tag in ("markowitz", "reverse_markowitz", "simultaneous", "md", "md_milp")}

header = f"{'model':<20} {'window ret%':>11} {'ret%/d':>7} {'std%/d':>7} {'worst%':>7}"
for window_name, window in (("IN-SAMPLE", train), ("OUT-OF-SAMPLE", test)):
    print(window_name)
    print(header)
    for tag, report in reports.items():
        if report.allocation is None:
            print(f"{tag:<20} {report.status.value}")
            continue
        m = compute_metrics(portfolio_series(window, report.allocation), report.allocation)
        print(f"{tag:<20} {m.cumulative_return*100:>11.2f} {m.mean_daily_return*100:>7.3f} "
              f"{m.std_daily*100:>7.3f} {m.max_drawdown*100:>7.2f}")
    print()
