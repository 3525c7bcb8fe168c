"""Allocation linear programs, a dense simplex solver, and vertex enumeration.

Variables are ``(n_1..n_k, s_1..s_k)`` where ``s_j`` bounds ``|n_j - p_j|``.
Rows shared by both distances::

    n_j - s_j <= p_j,   -n_j - s_j <= -p_j,   alpha n_j <= p_j,   sum_j n_j = 1

plus ``sum_j s_j <= epsilon`` (l1) or ``s_j <= epsilon p_j`` (relative l-inf).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ScaleError, ValidationError
from .model import Allocation, Distance, Scenario

VERTEX_MAX_LOCATIONS = 12
DEDUP_TOL = 1e-8

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-10
_PHASE1_TOL = 1e-8


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "="


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class Row:
    coeffs: np.ndarray
    relation: Relation
    rhs: float


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``minimize objective @ x`` over ``x >= 0`` subject to ``rows``."""

    objective: np.ndarray
    rows: tuple[Row, ...]

    def __post_init__(self):
        objective = np.asarray(self.objective, dtype=float)
        object.__setattr__(self, "objective", objective)
        for row in self.rows:
            if np.asarray(row.coeffs).shape != objective.shape:
                raise ValidationError("constraint row length differs from variable count")

    @property
    def num_variables(self) -> int:
        return self.objective.size

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(A_ub, b_ub, A_eq, b_eq)``."""
        ub = [r for r in self.rows if r.relation is Relation.LE]
        eq = [r for r in self.rows if r.relation is Relation.EQ]
        m = self.num_variables

        def stack(rows):
            if not rows:
                return np.zeros((0, m)), np.zeros(0)
            return np.array([r.coeffs for r in rows], dtype=float), np.array([r.rhs for r in rows])

        return (*stack(ub), *stack(eq))

    def with_objective(self, objective) -> "LinearProgram":
        return LinearProgram(np.asarray(objective, dtype=float), self.rows)


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective_value: float
    basis: tuple[int, ...]


def build_lp(scenario: Scenario, c) -> LinearProgram:
    """The allocation LP for ``scenario`` with linear objective ``c @ n``."""
    c = np.asarray(c, dtype=float)
    k = scenario.k
    if c.shape != (k,):
        raise ValidationError(f"objective must have length {k}")
    p = scenario.p
    m = 2 * k
    rows: list[Row] = []

    def row(entries: dict[int, float], relation: Relation, rhs: float) -> Row:
        coeffs = np.zeros(m)
        for idx, val in entries.items():
            coeffs[idx] = val
        return Row(coeffs, relation, float(rhs))

    for j in range(k):
        rows.append(row({j: 1.0, k + j: -1.0}, Relation.LE, p[j]))
        rows.append(row({j: -1.0, k + j: -1.0}, Relation.LE, -p[j]))
        rows.append(row({j: scenario.alpha}, Relation.LE, p[j]))
    if scenario.distance is Distance.L1:
        rows.append(row({k + j: 1.0 for j in range(k)}, Relation.LE, scenario.epsilon))
    else:
        for j in range(k):
            rows.append(row({k + j: 1.0}, Relation.LE, scenario.epsilon * p[j]))
    rows.append(row({j: 1.0 for j in range(k)}, Relation.EQ, 1.0))
    objective = np.concatenate([c, np.zeros(k)])
    return LinearProgram(objective, tuple(rows))


# ---------------------------------------------------------------------------
# Two-phase primal simplex, Bland's rule
# ---------------------------------------------------------------------------


def _pivot(T: np.ndarray, r: int, col: int) -> None:
    T[r] /= T[r, col]
    factors = T[:, col].copy()
    factors[r] = 0.0
    T -= np.outer(factors, T[r])


def _run_simplex(T: np.ndarray, basis: list[int], allowed: int) -> bool:
    """Bland pivots on tableau ``T`` (cost row last). False if unbounded.

    Only the first ``allowed`` columns may enter.
    """
    m = T.shape[0] - 1
    while True:
        costs = T[-1, :allowed]
        candidates = np.flatnonzero(costs < -_COST_TOL)
        if candidates.size == 0:
            return True
        col = int(candidates[0])
        column = T[:m, col]
        positive = np.flatnonzero(column > _PIVOT_TOL)
        if positive.size == 0:
            return False
        ratios = T[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, r, col)
        basis[r] = col


def solve(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` by the two-phase primal simplex method with Bland's rule.

    The returned point is a basic feasible solution.  ``basis`` lists the
    basic columns of the standard-form problem (original variables first,
    then one slack or surplus per inequality row).
    """
    A_ub, b_ub, A_eq, b_eq = lp.matrices()
    n_var = lp.num_variables
    n_ub = A_ub.shape[0]
    n_eq = A_eq.shape[0]
    m = n_ub + n_eq

    # Standard form: [x | slack/surplus per ub row | artificials]
    A = np.zeros((m, n_var + n_ub))
    b = np.zeros(m)
    A[:n_ub, :n_var] = A_ub
    A[:n_ub, n_var:] = np.eye(n_ub)
    b[:n_ub] = b_ub
    A[n_ub:, :n_var] = A_eq
    b[n_ub:] = b_eq
    negative = b < 0
    A[negative] *= -1.0
    b[negative] *= -1.0

    # Rows whose slack stays +1 start with the slack basic; others need an artificial.
    basis: list[int] = []
    needs_art: list[int] = []
    for i in range(m):
        if i < n_ub and not negative[i]:
            basis.append(n_var + i)
        else:
            basis.append(-1)
            needs_art.append(i)
    n_std = n_var + n_ub
    n_art = len(needs_art)
    T = np.zeros((m + 1, n_std + n_art + 1))
    T[:m, :n_std] = A
    T[:m, -1] = b
    for a, i in enumerate(needs_art):
        T[i, n_std + a] = 1.0
        basis[i] = n_std + a

    if n_art:
        T[-1, n_std : n_std + n_art] = 1.0
        for i in needs_art:
            T[-1] -= T[i]
        _run_simplex(T, basis, n_std + n_art)
        if -T[-1, -1] > _PHASE1_TOL:
            return LpSolution(LpStatus.INFEASIBLE, np.full(n_var, np.nan), float("nan"), ())
        # Drive remaining (zero-valued) artificials out of the basis.
        keep = []
        for i in range(m):
            if basis[i] >= n_std:
                cols = np.flatnonzero(np.abs(T[i, :n_std]) > _PIVOT_TOL)
                if cols.size:
                    _pivot(T, i, int(cols[0]))
                    basis[i] = int(cols[0])
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.hstack([T[:, :n_std], T[:, -1:]])
        m = len(keep)

    T[-1] = 0.0
    T[-1, :n_var] = lp.objective
    for i, col in enumerate(basis):
        if T[-1, col] != 0.0:
            T[-1] -= T[-1, col] * T[i]
    if not _run_simplex(T, basis, n_std):
        return LpSolution(LpStatus.UNBOUNDED, np.full(n_var, np.nan), float("-inf"), tuple(sorted(basis)))

    x_std = np.zeros(n_std)
    for i, col in enumerate(basis):
        x_std[col] = T[i, -1]
    x = x_std[:n_var]
    x[np.abs(x) < 1e-13] = 0.0
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.objective @ x), tuple(sorted(basis)))


def allocation_from_solution(solution: LpSolution, k: int) -> Allocation:
    """Drop the slack variables and renormalise away round-off."""
    n = np.clip(solution.x[:k], 0.0, None)
    return Allocation(n / n.sum())


# ---------------------------------------------------------------------------
# Vertex enumeration
# ---------------------------------------------------------------------------


def _bound_levels(scenario: Scenario) -> list[np.ndarray]:
    """Candidate values at which each coordinate can sit on a constraint."""
    p = scenario.p
    cap = p / scenario.alpha
    if scenario.distance is Distance.L1:
        return [np.unique([0.0, p[j], cap[j]]) for j in range(scenario.k)]
    lo = np.maximum(0.0, p * (1.0 - scenario.epsilon))
    hi = np.minimum(cap, p * (1.0 + scenario.epsilon))
    return [np.unique([lo[j], hi[j]]) for j in range(scenario.k)]


def _feasible_mask(scenario: Scenario, cand: np.ndarray, tol: float) -> np.ndarray:
    p = scenario.p
    ok = np.all(cand >= -tol, axis=1)
    ok &= np.all(scenario.alpha * cand <= p + tol, axis=1)
    ok &= np.abs(cand.sum(axis=1) - 1.0) <= tol
    if scenario.distance is Distance.L1:
        ok &= np.abs(cand - p).sum(axis=1) <= scenario.epsilon + tol
    else:
        ok &= np.max(np.abs(cand / p - 1.0), axis=1) <= scenario.epsilon + tol
    return ok


def _is_vertex(scenario: Scenario, n: np.ndarray, tol: float) -> bool:
    """Rank test on the constraints tight at ``n``.

    The l1 ball is written without slacks as ``sum_{j in T} (n_j - p_j) <=
    epsilon/2`` for every subset ``T`` (valid because both vectors sum to 1).
    When that budget is tight the tight subsets are the positive-deviation
    set plus any subset of the zero-deviation coordinates.
    """
    k = scenario.k
    p = scenario.p
    cap = p / scenario.alpha
    rows = [np.ones(k)]
    for j in range(k):
        at_bound = abs(n[j]) <= tol or abs(n[j] - cap[j]) <= tol
        if scenario.distance is Distance.LINF:
            at_bound = at_bound or abs(abs(n[j] / p[j] - 1.0) - scenario.epsilon) <= tol
        if at_bound:
            rows.append(np.eye(k)[j])
    if scenario.distance is Distance.L1:
        dev = n - p
        if abs(np.clip(dev, 0.0, None).sum() - scenario.epsilon / 2.0) <= tol:
            positive = (dev > tol).astype(float)
            rows.append(positive)
            for j in np.flatnonzero(np.abs(dev) <= tol):
                rows.append(positive + np.eye(k)[j])
    return np.linalg.matrix_rank(np.array(rows), tol=1e-9) == k


def enumerate_vertices(scenario: Scenario) -> list[Allocation]:
    """All vertices of the feasible allocation polytope, in lexicographic order.

    Each candidate active set fixes every coordinate but one (or, for l1 with
    the deviation budget tight, every coordinate but two) at one of its bound
    levels; the square system for the free coordinates is solved in closed
    form.  Feasible candidates that pass the tight-row rank test are kept.
    """
    k = scenario.k
    if k > VERTEX_MAX_LOCATIONS:
        raise ScaleError(f"vertex enumeration is limited to k <= {VERTEX_MAX_LOCATIONS}, got {k}")
    p = scenario.p
    levels = _bound_levels(scenario)
    tol = 1e-10
    found: list[np.ndarray] = []

    def fixed_grid(free: tuple[int, ...]) -> np.ndarray:
        others = [j for j in range(k) if j not in free]
        if not others:
            return np.zeros((1, k))
        grids = np.array(list(itertools.product(*(levels[j] for j in others))))
        full = np.zeros((grids.shape[0], k))
        full[:, others] = grids
        return full

    for f in range(k):
        cand = fixed_grid((f,))
        cand[:, f] = 1.0 - cand.sum(axis=1)
        found.append(cand[_feasible_mask(scenario, cand, tol)])

    if scenario.distance is Distance.L1 and k >= 2:
        half = scenario.epsilon / 2.0
        for up, down in itertools.permutations(range(k), 2):
            cand = fixed_grid((up, down))
            excess = np.clip(cand - p, 0.0, None)
            excess[:, [up, down]] = 0.0
            cand[:, up] = p[up] + half - excess.sum(axis=1)
            cand[:, down] = 1.0 - cand.sum(axis=1) + cand[:, down]
            found.append(cand[_feasible_mask(scenario, cand, tol)])

    stacked = np.vstack(found)
    # Exact repeats are common (several active sets name the same point).
    stacked = np.unique(np.round(stacked, 12), axis=0)
    vertices: list[np.ndarray] = []
    for n in stacked:
        if any(np.max(np.abs(v - n)) <= DEDUP_TOL for v in vertices):
            continue
        if _is_vertex(scenario, n, 1e-9):
            vertices.append(n)
    return [Allocation(np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()) for v in vertices]
