"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
print. Tolerances are fixed here and nowhere else.
"""

import contextlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from portopt.analytics import sensitivity_run
from portopt.cli_io import RunConfig, run_command
from portopt.core import AssetStats, ModelConfig, SolveStatus
from portopt.estimation import (
    PerturbationConfig,
    asset_stats,
    covariance,
    mean_returns,
)
from portopt.models import (
    markowitz_problem,
    solve_markowitz,
    solve_md,
    solve_md_milp,
    solve_reverse_markowitz,
    solve_simultaneous,
)
from portopt.qp_solver import QpProblem, solve_qp

from conftest import FIXTURE_PATH, FIXTURE_RHO, make_returns
from oracles import (
    grid_best_min_day_return,
    projected_gradient_qp,
    support_enumeration_md_milp,
    two_pass_mean_cov,
)


@contextlib.contextmanager
def criterion(number: int, name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:02d} {name}: FAIL")
        raise
    print(f"ACCEPTANCE {number:02d} {name}: PASS")


def test_criterion_01_epigraph_equivalence():
    with criterion(1, "epigraph equivalence vs weight grid"):
        rng = np.random.default_rng(101)
        started = time.perf_counter()
        for _ in range(50):
            n = int(rng.integers(2, 5))
            t_days = int(rng.integers(2, 7))
            data = np.clip(rng.normal(0.001, 0.02, (n, t_days)), -0.05, 0.05)
            rho = float(data.mean(axis=1).min())  # reachable by every budget point
            report = solve_md(make_returns(data), ModelConfig(rho=rho))
            assert report.status is SolveStatus.OPTIMAL
            grid_best = grid_best_min_day_return(data, rho, cap=0.5, resolution=0.01)
            assert report.objective >= grid_best - 1e-9
            assert report.objective - grid_best <= 0.01
        elapsed = time.perf_counter() - started
        assert elapsed < 30.0, f"epigraph suite took {elapsed:.1f}s"


def test_criterion_02_milp_support_enumeration():
    with criterion(2, "MILP matches support enumeration"):
        rng = np.random.default_rng(202)
        started = time.perf_counter()
        solved = 0
        for _ in range(25):
            n = int(rng.integers(3, 9))
            t_days = int(rng.integers(3, 11))
            data = rng.normal(0.001, 0.02, (n, t_days))
            rho = float(np.quantile(data.mean(axis=1), 0.3))
            report = solve_md_milp(make_returns(data), ModelConfig(rho=rho))
            reference = support_enumeration_md_milp(data, rho)
            if np.isfinite(reference):
                assert report.status is SolveStatus.OPTIMAL
                assert abs(report.objective - reference) <= 1e-7
                solved += 1
            else:
                assert report.status is SolveStatus.INFEASIBLE
        elapsed = time.perf_counter() - started
        assert solved >= 15
        assert elapsed < 60.0, f"MILP suite took {elapsed:.1f}s"


def test_criterion_03_qp_certificates():
    with criterion(3, "Frank-Wolfe certificates vs projected gradient"):
        rng = np.random.default_rng(303)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            t_days = int(rng.integers(n + 2, 40))
            panel = rng.normal(0.0, rng.uniform(0.01, 0.03), (n, t_days))
            centered = panel - panel.mean(axis=1, keepdims=True)
            q = centered @ centered.T / t_days
            q = 0.5 * (q + q.T) + 1e-8 * np.eye(n)
            c = -rng.uniform(0.0, 0.002, n) if rng.random() < 0.5 else np.zeros(n)
            cap = float(rng.uniform(0.5, 1.0))
            problem = QpProblem(q=q, c=c, a_eq=np.ones((1, n)), b_eq=np.array([1.0]),
                                lower=np.zeros(n), upper=np.full(n, cap))
            sol = solve_qp(problem, gap_tol=1e-6)
            assert sol.status is SolveStatus.OPTIMAL
            assert sol.fw_gap <= 1e-6 * (1.0 + abs(sol.objective))
            _, reference = projected_gradient_qp(q, c, np.zeros(n), np.full(n, cap))
            assert abs(sol.objective - reference) <= 1e-5
        # closed-form two-asset minimum-variance weights
        for _ in range(10):
            s1, s2 = rng.uniform(1e-4, 9e-4, 2)
            problem = QpProblem(q=np.diag([s1, s2]), c=np.zeros(2),
                                a_eq=np.ones((1, 2)), b_eq=np.array([1.0]),
                                lower=np.zeros(2), upper=np.ones(2))
            sol = solve_qp(problem, gap_tol=1e-6)
            assert abs(sol.v[0] - s2 / (s1 + s2)) <= 1e-6


def test_criterion_04_l1_has_no_effect():
    with criterion(4, "L1 penalty moves nothing"):
        rng = np.random.default_rng(404)
        for _ in range(20):
            n = int(rng.integers(3, 7))
            data = rng.normal(0.001, 0.02, (n, 40))
            stats = asset_stats(make_returns(data))
            lam = float(rng.uniform(0.5, 4.0))
            base = solve_simultaneous(stats, ModelConfig(lam=lam), gap_tol=1e-6)
            assert base.status is SolveStatus.OPTIMAL
            for mu in (0.01, 1.0, 100.0):
                augmented = solve_simultaneous(stats, ModelConfig(lam=lam, mu_l1=mu),
                                               gap_tol=1e-6)
                assert augmented.status is SolveStatus.OPTIMAL
                shift = augmented.objective - base.objective
                moved = np.max(np.abs(augmented.allocation.weights
                                      - base.allocation.weights))
                assert moved <= 1e-6, f"x moved {moved:.2e} at mu={mu}"
                assert abs(shift - mu) <= 1e-9, f"shift {shift!r} != mu {mu}"


def test_criterion_05_bigm_structure_on_fixture(fixture_milp_report):
    with criterion(5, "big-M structure on the bundled fixture"):
        assert fixture_milp_report.status is SolveStatus.OPTIMAL
        weights = fixture_milp_report.allocation.weights
        positive = weights[weights > 1e-9]
        assert 2 <= positive.size <= 20
        assert positive.min() >= 0.05 - 1e-9
        assert positive.max() <= 0.5 + 1e-9


def test_criterion_06_md_dominance_on_fixture(fixture_md_report, fixture_train):
    with criterion(6, "drawdown LP dominates random feasible portfolios"):
        assert fixture_md_report.status is SolveStatus.OPTIMAL
        y_star = fixture_md_report.objective
        mu = mean_returns(fixture_train)
        day_matrix = fixture_train.returns.T
        rng = np.random.default_rng(606)
        cap = 0.5
        order = np.argsort(-mu, kind="stable")
        greedy = np.zeros(mu.shape[0])
        remaining = 1.0
        for i in order:
            take = min(cap, remaining)
            greedy[i] = take
            remaining -= take
            if remaining <= 0:
                break
        assert mu @ greedy >= FIXTURE_RHO
        for _ in range(1000):
            support = rng.choice(mu.shape[0], size=int(rng.integers(2, 12)), replace=False)
            raw = rng.dirichlet(np.ones(support.size))
            x = np.zeros(mu.shape[0])
            x[support] = raw
            for _ in range(50):
                over = x > cap
                if not over.any():
                    break
                excess = float(np.sum(x[over] - cap))
                x[over] = cap
                room = x < cap - 1e-12
                x[room] += excess / room.sum()
            if mu @ x < FIXTURE_RHO:
                shortfall = FIXTURE_RHO - float(mu @ x)
                span = float(mu @ greedy - mu @ x)
                theta = min(1.0, shortfall / span + 1e-12)
                x = theta * greedy + (1.0 - theta) * x
            assert float((day_matrix @ x).min()) <= y_star + 1e-7


def test_criterion_07_frontier_bisection_consistency():
    with criterion(7, "frontier bisection hits the std ceiling"):
        rng = np.random.default_rng(707)
        for _ in range(5):
            n = int(rng.integers(3, 6))
            data = rng.normal(0.002, 0.02, (n, 50))
            data[rng.integers(0, n)] += 0.003  # a clear return leader
            stats = asset_stats(make_returns(data))
            min_var = solve_qp(markowitz_problem(stats, ModelConfig(), rho=None)[0])
            std_lo = float(np.sqrt(min_var.objective))
            best = int(np.argmax(stats.mean_returns))
            std_hi = float(np.sqrt(stats.covariance[best, best]))
            assert std_hi > std_lo * 1.05, "instance must make the ceiling bind"
            sigma0 = float(np.sqrt(std_lo * std_hi))
            report = solve_reverse_markowitz(stats, ModelConfig(sigma0=sigma0))
            assert report.status is SolveStatus.OPTIMAL
            x = report.allocation.weights
            achieved_std = float(np.sqrt(x @ stats.covariance @ x))
            assert abs(achieved_std - sigma0) <= 1e-4
            rho_star = float(stats.mean_returns @ x)
            direct = solve_markowitz(stats, ModelConfig(rho=rho_star))
            assert direct.status is SolveStatus.OPTIMAL
            direct_return = float(stats.mean_returns @ direct.allocation.weights)
            assert rho_star >= direct_return - 1e-6


def test_criterion_08_backtest_tables_on_fixture(tmp_path):
    with criterion(8, "backtest emits both tables; MILP no slower than QP"):
        out = tmp_path / "bt"
        cfg = RunConfig(
            command="backtest", prices=str(FIXTURE_PATH), output_dir=str(out),
            rho=FIXTURE_RHO, sigma0=0.012, lam=0.08,
            train_end="2020-05-01", test_end="2020-07-31",
        )
        assert run_command(cfg) == 0
        table1 = (out / "insample.csv").read_text().splitlines()
        table2 = (out / "outsample.csv").read_text().splitlines()
        assert table1[0] == "model,exp_return,std_dev,max_drawdown,n_stocks,time_s"
        assert table2[0] == "model,period_return,daily_return,std_dev,max_drawdown"
        expected = ["markowitz", "reverse_markowitz", "simultaneous", "md", "md_milp"]
        assert [r.split(",")[0] for r in table1[1:]] == expected
        assert [r.split(",")[0] for r in table2[1:]] == expected
        rows = {r.split(",")[0]: r.split(",") for r in table1[1:]}
        for tag in expected:
            assert len(rows[tag]) == 6
            assert rows[tag][1] != "", f"{tag} did not solve"
        time_qp = float(rows["markowitz"][5])
        time_milp = float(rows["md_milp"][5])
        assert time_milp <= time_qp, (
            f"MILP took {time_milp:.3f}s vs QP {time_qp:.3f}s")


def test_criterion_09_sensitivity_determinism_and_limits(tmp_path):
    with criterion(9, "sensitivity is seed-deterministic and zero at zero noise"):
        # determinism on the fixture universe, restricted to a fast model pair
        blobs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            cfg = RunConfig(command="sensitivity", prices=str(FIXTURE_PATH),
                            output_dir=str(out), models=("md", "md_milp"),
                            rho=FIXTURE_RHO, seed=7, c=1000.0)
            assert run_command(cfg) == 0
            blobs.append((out / "sensitivity.csv").read_bytes()
                         + (out / "covariance_change.csv").read_bytes())
        assert blobs[0] == blobs[1]
        # constant-return assets: zero noise, zero allocation change, all models
        means = np.array([0.004, 0.0015, 0.002, 0.003, 0.001])
        data = np.repeat(means[:, None], 15, axis=1)
        returns = make_returns(data)
        cfgs = {
            "markowitz": ModelConfig(rho=0.002),
            "reverse_markowitz": ModelConfig(sigma0=0.01),
            "simultaneous": ModelConfig(lam=1.0),
            "md": ModelConfig(rho=0.002),
            "md_milp": ModelConfig(rho=0.002),
        }
        report = sensitivity_run(returns, cfgs, PerturbationConfig(c=1000.0, seed=11))
        for row in report.rows:
            assert row.status == "Optimal", row
            assert row.alloc_change_pct == pytest.approx(0.0, abs=1e-12)


def test_criterion_10_estimator_oracles(fixture_returns, fixture_split):
    with criterion(10, "moment estimators match the two-pass reference"):
        rng = np.random.default_rng(1010)
        for _ in range(100):
            n = int(rng.integers(1, 7))
            t_days = int(rng.integers(2, 25))
            data = rng.normal(0.001, 0.02, (n, t_days))
            returns = make_returns(data)
            ref_mean, ref_cov = two_pass_mean_cov(data)
            assert np.max(np.abs(mean_returns(returns) - ref_mean)) < 1e-12
            assert np.max(np.abs(covariance(returns) - ref_cov)) < 1e-12
        train, test = fixture_split
        for window in (train, test, fixture_returns):
            eigmin = float(np.linalg.eigvalsh(covariance(window)).min())
            assert eigmin >= -1e-10
            AssetStats(mean_returns(window), covariance(window))  # must not raise
