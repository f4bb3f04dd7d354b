"""Convex quadratic programming over a polytope by Frank-Wolfe iteration.

Minimizes c @ v + v @ Q @ v with Q symmetric positive semi-definite, over the
same row-and-bounds feasible region the LP solver understands. Each iteration
asks the simplex for the vertex s minimizing the linearized objective
grad f(v) @ s; the quantity g(v) = grad f(v) @ (v - s) is the Frank-Wolfe gap,
and convexity gives f(v) - f* <= g(v), so the final gap doubles as a duality
certificate for the returned objective.

The step is an exact line search, closed-form for a quadratic along
d = s - v: gamma = clamp(-(grad @ d) / (2 d @ Q @ d), 0, 1), with gamma = 1
when d @ Q @ d vanishes (the objective is linear along d). The objective is
therefore non-increasing at every iteration.

Practical notes: the oracle LP keeps its feasible region fixed across
iterations, so each call after the first warm-starts from the previous basis;
Q @ v is updated incrementally from Q @ s (vertices are sparse) and refreshed
periodically to stop floating-point drift. Frank-Wolfe's O(1/k) tail makes
very tight gaps expensive; the default relative gap of 1e-8 suits the
daily-decimal covariance scale this package works at, and callers wanting
speed can pass 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, DimensionError, SolveStatus, PSD_TOL, SYM_TOL
from .lp_solver import LpProblem, LpSolution, solve_lp

GAP_TOL_DEFAULT = 1e-8
MAX_ITERS_DEFAULT = 50_000
REFRESH_EVERY = 1024


@dataclass(frozen=True)
class QpProblem:
    """min c @ v + v @ Q @ v over {A_eq v = b_eq, A_ub v <= b_ub, l <= v <= u}.

    The feasible region must be nonempty and bounded (every vertex the oracle
    can return has finite coordinates)."""

    q: np.ndarray
    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = c.shape[0]
        if q.shape != (n, n):
            raise DimensionError(f"Q must be {n} x {n}, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise DataError("Q contains NaN or Inf")
        if np.max(np.abs(q - q.T), initial=0.0) > SYM_TOL:
            raise DataError(f"Q not symmetric within {SYM_TOL}")
        if n and not _is_psd(q):
            raise DataError(f"Q not positive semi-definite within {PSD_TOL}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c", c)
        # Delegate region validation to the LP layer.
        region = LpProblem(c=np.zeros(n), a_eq=self.a_eq, b_eq=self.b_eq,
                           a_ub=self.a_ub, b_ub=self.b_ub,
                           lower=self.lower, upper=self.upper)
        object.__setattr__(self, "_region", region)

    def region_with_objective(self, c: np.ndarray) -> LpProblem:
        r = self._region
        return LpProblem(c=c, sense="min", a_eq=r.a_eq, b_eq=r.b_eq,
                         a_ub=r.a_ub, b_ub=r.b_ub, lower=r.lower, upper=r.upper)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]


def _is_psd(q: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(q + PSD_TOL * np.eye(q.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return bool(np.linalg.eigvalsh(q).min() >= -PSD_TOL)


@dataclass(frozen=True)
class QpSolution:
    v: np.ndarray
    objective: float
    fw_gap: float
    iterations: int
    status: SolveStatus
    oracle_pivots: int = 0


def solve_qp(
    problem: QpProblem,
    max_iters: int = MAX_ITERS_DEFAULT,
    gap_tol: float = GAP_TOL_DEFAULT,
    start: np.ndarray | None = None,
) -> QpSolution:
    """Frank-Wolfe with exact line search and the simplex as linear oracle.

    Stops when the Frank-Wolfe gap falls below gap_tol * (1 + |objective|),
    returning status Optimal; on hitting max_iters the best (current) iterate
    is returned with status IterationLimit and its gap. An infeasible region
    surfaces as status Infeasible from the initialization LP.

    `start` optionally supplies a feasible warm-start point (used by the
    frontier bisection); infeasible starts are rejected and replaced by the
    phase-1 vertex.
    """
    n = problem.n_vars
    q, c = problem.q, problem.c
    oracle_pivots = 0

    warm: tuple | None = None
    x: np.ndarray | None = None
    if start is not None:
        start = np.asarray(start, dtype=float)
        if start.shape == (n,) and _feasible(problem, start):
            x = start.copy()
    if x is None:
        init = solve_lp(problem.region_with_objective(np.zeros(n)))
        oracle_pivots += init.pivots
        if init.status is not SolveStatus.OPTIMAL:
            status = SolveStatus.INFEASIBLE if init.status is SolveStatus.INFEASIBLE \
                else SolveStatus.UNBOUNDED
            return QpSolution(np.full(n, np.nan), np.nan, np.inf, 0, status, oracle_pivots)
        x = init.v.copy()
        warm = (init.basis, init.col_status)

    qx = q @ x
    gap = np.inf
    for it in range(1, max_iters + 1):
        grad = c + 2.0 * qx
        oracle = solve_lp(problem.region_with_objective(grad), warm_basis=warm)
        oracle_pivots += oracle.pivots
        if oracle.status is not SolveStatus.OPTIMAL:
            raise RuntimeError(
                f"linear oracle returned {oracle.status.value}; "
                "the QP feasible region must be nonempty and bounded"
            )
        warm = (oracle.basis, oracle.col_status)
        s = oracle.v
        gap = float(grad @ (x - s))
        f = float(c @ x + x @ qx)
        if gap <= gap_tol * (1.0 + abs(f)):
            return QpSolution(x, f, gap, it, SolveStatus.OPTIMAL, oracle_pivots)

        d = s - x
        qs = _sparse_matvec(q, s)
        qd = qs - qx
        curvature = float(d @ qd)
        if curvature <= 1e-14:
            gamma = 1.0
        else:
            gamma = min(1.0, max(0.0, gap / (2.0 * curvature)))
        x = x + gamma * d
        qx = qx + gamma * qd
        if it % REFRESH_EVERY == 0:
            qx = q @ x

    f = float(c @ x + x @ (q @ x))
    return QpSolution(x, f, gap, max_iters, SolveStatus.ITERATION_LIMIT, oracle_pivots)


def _sparse_matvec(q: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Q @ s exploiting that oracle vertices have few nonzero coordinates."""
    nz = np.nonzero(s)[0]
    if nz.size == 0:
        return np.zeros(q.shape[0])
    if nz.size > q.shape[0] // 4:
        return q @ s
    return q[:, nz] @ s[nz]


def _feasible(problem: QpProblem, v: np.ndarray) -> bool:
    r = problem._region
    tol = 1e-9
    if r.a_eq.shape[0] and np.max(np.abs(r.a_eq @ v - r.b_eq)) > tol:
        return False
    if r.a_ub.shape[0] and np.max(r.a_ub @ v - r.b_ub) > tol:
        return False
    return bool(np.all(v >= r.lower - tol) and np.all(v <= r.upper + tol))
