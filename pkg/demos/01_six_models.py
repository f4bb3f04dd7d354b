"""Solve all six allocation models on one training window and compare them.

Uses a 150-name subset of the bundled price panel to keep the quadratic
models quick; point FIXTURE at your own prices CSV to rerun on real data.
"""

import sys
from pathlib import Path

import numpy as np

from portopt import ModelConfig, compute_simple_returns, asset_stats
from portopt.cli_io import ingest_prices
from portopt.analytics import SplitSpec, train_test_split, portfolio_series, compute_metrics
from portopt.models import (
    solve_markowitz,
    solve_reverse_markowitz,
    solve_simultaneous,
    solve_mad,
    solve_md,
    solve_md_milp,
)

FIXTURE = Path(__file__).parent.parent / "data" / "prices_2020h1.csv"
N_SUBSET = 150
RHO = 0.001      # required daily expected return: 0.1%
SIGMA0 = 0.012   # daily standard deviation ceiling: 1.2%
LAM = 0.08       # risk-penalty weight for the simultaneous model

prices = ingest_prices(sys.argv[1] if len(sys.argv) > 1 else FIXTURE)
prices = type(prices)(prices.tickers[:N_SUBSET], prices.dates, prices.prices[:N_SUBSET])
returns = compute_simple_returns(prices)
train, _ = train_test_split(
    returns, SplitSpec(returns.dates[0], "2020-05-01", "2020-05-04", returns.dates[-1]))
stats = asset_stats(train)

print(f"universe: {train.n_assets} assets, {train.n_days} training days")
print(f"constraints: rho={RHO:.4f}, sigma0={SIGMA0:.4f}, lambda={LAM}\n")

runs = [
    ("min-variance QP", solve_markowitz(stats, ModelConfig(rho=RHO))),
    ("reverse (max return)", solve_reverse_markowitz(stats, ModelConfig(sigma0=SIGMA0))),
    ("simultaneous QP", solve_simultaneous(stats, ModelConfig(lam=LAM))),
    ("MAD LP", solve_mad(train, ModelConfig(rho=RHO))),
    ("max-drawdown LP", solve_md(train, ModelConfig(rho=RHO))),
    ("drawdown MILP (>=5%)", solve_md_milp(train, ModelConfig(rho=RHO))),
]

print(f"{'model':<22} {'ret%/d':>7} {'std%/d':>7} {'worst%':>7} {'names':>6} {'time s':>8}")
for label, report in runs:
    if report.allocation is None:
        print(f"{label:<22} {report.status.value}")
        continue
    metrics = compute_metrics(portfolio_series(train, report.allocation), report.allocation)
    print(f"{label:<22} {metrics.mean_daily_return*100:>7.3f} {metrics.std_daily*100:>7.3f} "
          f"{metrics.max_drawdown*100:>7.2f} {metrics.n_positions:>6d} {report.wall_time:>8.3f}")

milp = runs[-1][1].allocation.weights
held = np.argsort(-milp)[: (milp > 1e-9).sum()]
print("\ndrawdown MILP holdings:")
for i in held:
    print(f"  {train.tickers[i]}: {milp[i]*100:.2f}%")
