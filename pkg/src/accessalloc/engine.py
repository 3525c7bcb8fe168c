"""Allocation algorithms.

The access-aware heuristic alternates between a linear program and a
correction of the acquisition shares:

1. solve the LP with coefficients from the naive acquisition shares;
2. mark locations whose coverage ``alpha n_j / p_j`` exceeds
   ``eta beta_j + 1 - beta_j`` as saturated and switch their share to
   ``1 - (1 - beta_j) p_j / (alpha n_j)``;
3. rebuild the coefficients from the corrected shares and re-solve;
4. stop when the allocation stops moving or a saturated-set signature repeats.

Noisy restarts perturb the initial naive shares.  The Bayesian variant keeps
one set of shares per access-gap value and optimises the probability-weighted
coefficients; the minimax variant maximises that Bayesian optimum over the
weights by projected finite-difference ascent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, ValidationError
from .model import (
    AcquisitionOutcome,
    Allocation,
    DisparityReport,
    RhoModel,
    Scenario,
    disparity,
    disparity_coefficients,
    naive_rho,
    rate_disparity,
    rd_approx,
)
from .optimize import LinearProgram, LpStatus, allocation_from_solution, build_lp, solve

SATURATION_TOL = 1e-12
STABLE_TOL = 1e-6
_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = 100
    convergence_tol: float = 1e-9
    restarts: int = 0
    restart_noise_sigma: float = 1.0
    seed: int = 0
    minimax_steps: int = 500
    minimax_step_size: float = 0.1
    minimax_fd_step: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.restarts < 0:
            raise ValidationError("restarts must be >= 0")
        if self.restart_noise_sigma < 0:
            raise ValidationError("restart_noise_sigma must be >= 0")
        if not (0 <= self.seed <= _UINT64):
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if self.minimax_steps < 1:
            raise ValidationError("minimax_steps must be >= 1")


@dataclass(frozen=True, eq=False)
class IterationRecord:
    allocation: Allocation
    rd: float
    saturated: tuple[frozenset[int], ...]  # one set per access-gap value


@dataclass(eq=False)
class SolveTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    cycle_detected: bool = False
    restart_index_of_best: int = 0
    runs: int = 1

    @property
    def saturated(self) -> frozenset[int]:
        """Saturated locations at the returned allocation (first gap value)."""
        best = min(self.iterations, key=lambda rec: rec.rd)
        return best.saturated[0]


@dataclass(frozen=True, eq=False)
class SweepRow:
    eta: float
    allocation: Allocation
    rd_access_aware: float
    rd_proportional: float
    iterations: int
    converged: bool

    @property
    def improvement(self) -> float:
        return self.rd_proportional - self.rd_access_aware


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: tuple[SweepRow, ...]
    allocation_stable: bool


@dataclass(frozen=True, eq=False)
class BayesianResult:
    allocation: Allocation
    expected_rd: float
    trace: SolveTrace


@dataclass(frozen=True, eq=False)
class MinimaxResult:
    distribution: np.ndarray
    allocation: Allocation
    maximin_value: float
    bound: tuple[float, float]
    primal_value: float
    weak_duality_holds: bool
    converged: bool
    steps: int


def _require_allocatable(scenario: Scenario) -> None:
    if not scenario.alpha < 1.0:
        raise ValidationError("allocation requires scarce resources (alpha < 1)")


def _check_eta_values(etas) -> np.ndarray:
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    if etas.size == 0:
        raise ValidationError("at least one eta value is required")
    if np.any(~(etas > 0)) or np.any(etas > 1):
        raise ValidationError("eta values must lie in (0, 1]")
    return etas


def _eta_values(scenario: Scenario, etas) -> np.ndarray:
    if etas is None:
        if scenario.eta is None:
            raise ValidationError("no eta given and the scenario carries none")
        etas = scenario.eta.values
    return _check_eta_values(etas)


def proportional(scenario: Scenario) -> Allocation:
    """Baseline ``n = p``."""
    return Allocation(scenario.p.copy())


def _solve_lp(lp: LinearProgram, c: np.ndarray, k: int) -> Allocation:
    solution = solve(lp.with_objective(np.concatenate([c, np.zeros(k)])))
    if solution.status is not LpStatus.OPTIMAL:
        # n = p is always feasible, so this signals numerical trouble.
        raise InfeasibleError(f"allocation LP returned {solution.status.value}")
    return allocation_from_solution(solution, k)


def solve_naive(scenario: Scenario, eta: float) -> tuple[Allocation, DisparityReport]:
    """Optimal allocation when acquisition shares ignore saturation."""
    _require_allocatable(scenario)
    (eta,) = _check_eta_values(eta)
    rho = naive_rho(scenario.betas, eta)
    c = disparity_coefficients(scenario, rho)
    lp = build_lp(scenario, c)
    allocation = _solve_lp(lp, c, scenario.k)
    report = disparity(scenario, allocation, AcquisitionOutcome(rho, RhoModel.NAIVE, float(eta)))
    return allocation, report


@dataclass(eq=False)
class _Run:
    records: list[IterationRecord]
    converged: bool
    cycle_detected: bool

    @property
    def best(self) -> IterationRecord:
        return min(self.records, key=lambda rec: rec.rd)


def _corrected_shares(scenario: Scenario, n: np.ndarray, eta: float, naive: np.ndarray):
    """Approximate-model shares at ``n`` and the saturated mask."""
    beta = scenario.betas
    p = scenario.p
    coverage = scenario.alpha * n / p
    saturated = coverage > eta * beta + 1.0 - beta + SATURATION_TOL
    safe_n = np.where(saturated, n, 1.0)
    rho = np.where(saturated, 1.0 - (1.0 - beta) * p / (scenario.alpha * safe_n), naive)
    return rho, saturated


def _iterate(
    scenario: Scenario,
    lp: LinearProgram,
    etas: np.ndarray,
    weights: np.ndarray,
    naive: np.ndarray,
    initial: np.ndarray,
    config: EngineConfig,
) -> _Run:
    """One fixed-point run; ``naive`` and ``initial`` have shape ``(L, k)``."""
    k = scenario.k
    rho = initial
    records: list[IterationRecord] = []
    seen: set[tuple[frozenset[int], ...]] = set()
    previous: np.ndarray | None = None
    converged = cycled = False
    for _ in range(config.max_iterations):
        c = sum(w * disparity_coefficients(scenario, r) for w, r in zip(weights, rho))
        allocation = _solve_lp(lp, c, k)
        n = allocation.n
        shares = []
        signature = []
        rd = 0.0
        for w, eta, base in zip(weights, etas, naive):
            r, saturated = _corrected_shares(scenario, n, eta, base)
            shares.append(r)
            signature.append(frozenset(int(j) for j in np.flatnonzero(saturated)))
            rd += w * rate_disparity(scenario, n, r)
        rho = np.array(shares)
        signature = tuple(signature)
        records.append(IterationRecord(allocation, float(rd), signature))
        if previous is not None and np.max(np.abs(n - previous)) < config.convergence_tol:
            converged = True
            break
        if signature in seen:
            cycled = True
            break
        seen.add(signature)
        previous = n
    return _Run(records, converged, cycled)


def _restart_generator(seed: int, restart: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed ^ restart) & _UINT64))


def _solve_weighted(
    scenario: Scenario, etas: np.ndarray, weights: np.ndarray, config: EngineConfig
) -> tuple[Allocation, float, SolveTrace]:
    """Heuristic minimiser of ``sum_i w_i RD(n, eta_i)`` under the approximate model.

    Run 0 starts from the naive shares; run ``r >= 1`` starts from the naive
    shares plus ``sigma * N(0, 1)`` noise per coordinate, clipped to [0, 1].
    The run whose best iterate has the lowest weighted RD wins (ties go to
    the earlier run).
    """
    _require_allocatable(scenario)
    naive = np.array([naive_rho(scenario.betas, eta) for eta in etas])
    lp = build_lp(scenario, np.zeros(scenario.k))
    best_run: _Run | None = None
    best_index = 0
    for r in range(config.restarts + 1):
        if r == 0:
            initial = naive
        else:
            noise = _restart_generator(config.seed, r).standard_normal(naive.shape)
            initial = np.clip(naive + config.restart_noise_sigma * noise, 0.0, 1.0)
        run = _iterate(scenario, lp, etas, weights, naive, initial, config)
        if best_run is None or run.best.rd < best_run.best.rd:
            best_run, best_index = run, r
    assert best_run is not None
    trace = SolveTrace(
        iterations=best_run.records,
        converged=best_run.converged,
        cycle_detected=best_run.cycle_detected,
        restart_index_of_best=best_index,
        runs=config.restarts + 1,
    )
    best = best_run.best
    return best.allocation, best.rd, trace


def solve_access_aware(
    scenario: Scenario, eta: float, config: EngineConfig | None = None
) -> tuple[Allocation, SolveTrace]:
    """Iterative access-aware allocation at a single access gap."""
    config = config or EngineConfig()
    etas = _check_eta_values(eta)
    if etas.size != 1:
        raise ValidationError("solve_access_aware takes a single eta")
    allocation, _, trace = _solve_weighted(scenario, etas, np.ones(1), config)
    return allocation, trace


def sweep_eta(scenario: Scenario, config: EngineConfig | None = None, etas=None) -> SweepResult:
    """Access-aware allocation at every grid value, against the proportional baseline."""
    config = config or EngineConfig()
    etas = _eta_values(scenario, etas)
    p = scenario.p
    rows = []
    for eta in etas:
        allocation, trace = solve_access_aware(scenario, float(eta), config)
        rows.append(
            SweepRow(
                eta=float(eta),
                allocation=allocation,
                rd_access_aware=rd_approx(scenario, allocation.n, eta),
                rd_proportional=rd_approx(scenario, p, eta),
                iterations=len(trace.iterations),
                converged=trace.converged,
            )
        )
    first = rows[0].allocation.n
    stable = all(np.max(np.abs(row.allocation.n - first)) <= STABLE_TOL for row in rows)
    return SweepResult(tuple(rows), stable)


def _distribution(scenario: Scenario, etas, weights) -> tuple[np.ndarray, np.ndarray]:
    if etas is None:
        if scenario.eta is None:
            raise ValidationError("no eta distribution given and the scenario carries none")
        etas, weights = scenario.eta.values, scenario.eta.probabilities
    etas = _check_eta_values(etas)
    if weights is None:
        weights = np.full(etas.size, 1.0 / etas.size)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != etas.shape:
        raise ValidationError("eta values and weights differ in length")
    if np.any(weights < 0) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise ValidationError("eta weights must be nonnegative and sum to 1")
    return etas, weights


def expected_rd(scenario: Scenario, n, etas, weights) -> float:
    """``sum_i w_i RD(n, eta_i)`` under the approximate model."""
    return float(sum(w * rd_approx(scenario, n, eta) for eta, w in zip(etas, weights)))


def solve_bayesian(
    scenario: Scenario, config: EngineConfig | None = None, etas=None, weights=None
) -> BayesianResult:
    """Minimise the expected RD over a discrete access-gap distribution."""
    config = config or EngineConfig()
    etas, weights = _distribution(scenario, etas, weights)
    allocation, rd, trace = _solve_weighted(scenario, etas, weights, config)
    return BayesianResult(allocation, rd, trace)


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def solve_minimax(scenario: Scenario, config: EngineConfig | None = None, etas=None) -> MinimaxResult:
    """Maximin relaxation of ``min_n max_i RD(n, eta_i)``.

    ``g(P) = min_n sum_i P_i RD(n, eta_i)`` is maximised over the simplex by
    projected ascent with step ``step_size / sqrt(t)`` and central
    finite-difference gradients; each ``g`` evaluation is a Bayesian solve.
    The primal value ``max_i RD(n*, eta_i)`` at the returned allocation is
    reported next to ``g(P*)`` (weak duality: the former is at least the
    latter).  ``bound`` is ``[g, L * g]``, meaningful only when both values
    share a sign.
    """
    config = config or EngineConfig()
    etas = _eta_values(scenario, etas)
    L = etas.size
    if L < 2:
        raise ValidationError("minimax needs at least two eta values")
    cache: dict[tuple[float, ...], tuple[float, Allocation]] = {}

    def g(weights: np.ndarray) -> tuple[float, Allocation]:
        key = tuple(float(w) for w in weights)
        if key not in cache:
            allocation, rd, _ = _solve_weighted(scenario, etas, weights, config)
            cache[key] = (rd, allocation)
        return cache[key]

    h = config.minimax_fd_step
    P = np.full(L, 1.0 / L)
    value, allocation = g(P)
    best = (value, P.copy(), allocation)
    converged = False
    steps = 0
    for t in range(1, config.minimax_steps + 1):
        steps = t
        grad = np.empty(L)
        for i in range(L):
            e = np.zeros(L)
            e[i] = h
            grad[i] = (g(P + e)[0] - g(P - e)[0]) / (2.0 * h)
        nxt = project_to_simplex(P + config.minimax_step_size / math.sqrt(t) * grad)
        if np.max(np.abs(nxt - P)) < 1e-12:
            converged = True
            break
        P = nxt
        value, allocation = g(P)
        if value > best[0]:
            best = (value, P.copy(), allocation)

    value, P_best, allocation = best
    primal = max(rd_approx(scenario, allocation.n, eta) for eta in etas)
    return MinimaxResult(
        distribution=P_best,
        allocation=allocation,
        maximin_value=value,
        bound=(value, L * value),
        primal_value=primal,
        weak_duality_holds=primal >= value - 1e-6,
        converged=converged,
        steps=steps,
    )
