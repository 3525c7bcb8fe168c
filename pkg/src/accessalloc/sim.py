"""Stochastic oracle for the access model.

Two independent routes to the acquisition function:

* :func:`dp_exact_rho` propagates the exact distribution of the jump chain
  (who takes the next unit) over ``N`` steps;
* :func:`simulate_acquisition` samples that chain.

:func:`trajectories` samples the continuous-time stopped processes and reports
mean counts with percentile envelopes over time.

Randomness comes from Philox4x64-10 (counter-based).  Trials are grouped into
fixed-size blocks and block ``b`` is keyed with ``seed ^ b``, so results do not
depend on how blocks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScaleError, ValidationError
from .model import naive_rho, split_population

RNG_ALGORITHM = "Philox4x64-10"
BLOCK_TRIALS = 4096
DP_MAX_POPULATION = 5000
_UINT64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    trials: int = 100_000
    seed: int = 0
    time_resolution: int = 101

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.time_resolution < 2:
            raise ValidationError("time_resolution must be >= 2")
        if not (0 <= self.seed <= _UINT64):
            raise ValidationError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class TrajectoryStats:
    times: np.ndarray
    mean_total: np.ndarray
    mean_advantaged: np.ndarray
    p5_total: np.ndarray
    p95_total: np.ndarray
    p5_advantaged: np.ndarray
    p95_advantaged: np.ndarray

    @property
    def mean_disadvantaged(self) -> np.ndarray:
        return self.mean_total - self.mean_advantaged

    def rows(self):
        """CSV rows ``t, mean_total, mean_adv, p5_total, p95_total, p5_adv, p95_adv``."""
        cols = (
            self.times,
            self.mean_total,
            self.mean_advantaged,
            self.p5_total,
            self.p95_total,
            self.p5_advantaged,
            self.p95_advantaged,
        )
        return [tuple(float(c[i]) for c in cols) for i in range(self.times.size)]


TRAJECTORY_COLUMNS = ("t", "mean_total", "mean_adv", "p5_total", "p95_total", "p5_adv", "p95_adv")


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Generator for trial block ``block``: Philox keyed by ``seed ^ block``."""
    return np.random.Generator(np.random.Philox(key=(seed ^ block) & _UINT64))


def _validate_location(N: int, P: int, beta: float, eta: float) -> None:
    if int(N) != N or int(P) != P:
        raise ValidationError("N and P must be integers")
    if N < 1:
        raise ValidationError("N must be >= 1")
    if N > P:
        raise ValidationError(f"N={N} exceeds P={P} (no-waste violated)")
    if not (0.0 <= beta <= 1.0):
        raise ValidationError("beta must lie in [0, 1]")
    if not (0.0 < eta <= 1.0):
        raise ValidationError("eta must lie in (0, 1]")


def simulate_acquisition(N: int, P: int, beta: float, eta: float, config: SimConfig) -> tuple[float, float]:
    """Monte Carlo estimate of the acquisition share and its standard error.

    Each trial walks through the ``N`` acquisition events.  While both groups
    are unsaturated the next unit goes to the disadvantaged with probability
    ``eta*d / (eta*d + a)``; once a group is saturated the other takes every
    remaining unit.
    """
    _validate_location(N, P, beta, eta)
    N, P = int(N), int(P)
    d, a = split_population(P, beta)
    if d == 0:
        return 0.0, 0.0
    q = naive_rho(d / P, eta)

    # Memory per block is BLOCK_TRIALS * N uniforms; shrink the chunk of
    # events drawn at once for large N.
    chunk = max(1, min(N, 2_000_000 // BLOCK_TRIALS))
    shares = np.empty(config.trials)
    n_blocks = math.ceil(config.trials / BLOCK_TRIALS)
    for b in range(n_blocks):
        lo = b * BLOCK_TRIALS
        hi = min(config.trials, lo + BLOCK_TRIALS)
        size = hi - lo
        rng = block_generator(config.seed, b)
        u = np.zeros(size, dtype=np.int64)
        v = np.zeros(size, dtype=np.int64)
        done = 0
        while done < N:
            step = min(chunk, N - done)
            draws = rng.random((step, size))
            for t in range(step):
                to_dis = draws[t] < q
                to_dis = np.where(u >= d, False, np.where(v >= a, True, to_dis))
                u += to_dis
                v += ~to_dis
            done += step
        shares[lo:hi] = u / N
    mean = float(shares.mean())
    if config.trials == 1:
        return mean, 0.0
    std_error = float(shares.std(ddof=1) / math.sqrt(config.trials))
    return mean, std_error


def _dp_mean_curve(P: int, d: int, q: float, steps: int) -> np.ndarray:
    """``E[U after m units]`` for ``m = 0..steps`` by forward propagation.

    State after ``m`` units is the disadvantaged count ``u`` (``v = m - u``).
    """
    a = P - d
    dist = np.zeros(d + 1)
    dist[0] = 1.0
    u = np.arange(d + 1)
    means = np.zeros(steps + 1)
    for m in range(steps):
        v = m - u
        p_dis = np.where(u >= d, 0.0, np.where(v >= a, 1.0, q))
        moved = dist * p_dis
        nxt = dist - moved
        nxt[1:] += moved[:-1]
        dist = nxt
        means[m + 1] = float(np.dot(dist, u))
    return means


def dp_exact_rho(N: int, P: int, beta: float, eta: float) -> float:
    """Exact acquisition share by dynamic programming over (u, v) states."""
    _validate_location(N, P, beta, eta)
    if P > DP_MAX_POPULATION:
        raise ScaleError(f"P={P} exceeds the dynamic-programming cap {DP_MAX_POPULATION}")
    N, P = int(N), int(P)
    d, _ = split_population(P, beta)
    if d == 0:
        return 0.0
    q = naive_rho(d / P, eta)
    return float(_dp_mean_curve(P, d, q, N)[N] / N)


def dp_exact_rho_curve(P: int, beta: float, eta: float) -> np.ndarray:
    """Exact acquisition shares for every ``N = 1..P`` from one DP pass.

    Entry ``N - 1`` equals ``dp_exact_rho(N, P, beta, eta)``.
    """
    _validate_location(P, P, beta, eta)
    if P > DP_MAX_POPULATION:
        raise ScaleError(f"P={P} exceeds the dynamic-programming cap {DP_MAX_POPULATION}")
    d, _ = split_population(P, beta)
    if d == 0:
        return np.zeros(P)
    q = naive_rho(d / P, eta)
    means = _dp_mean_curve(P, d, q, P)
    return means[1:] / np.arange(1, P + 1)


def nearest_rank(sorted_values: np.ndarray, pct: float, axis: int = 0) -> np.ndarray:
    """Nearest-rank percentile of data already sorted along ``axis``."""
    count = sorted_values.shape[axis]
    rank = max(1, math.ceil(pct / 100.0 * count))
    return np.take(sorted_values, rank - 1, axis=axis)


def _stopped_counts(rng: np.random.Generator, rate: float, cap: int, times: np.ndarray, trials: int) -> np.ndarray:
    """Counts at ``times`` of Poisson processes with rate ``rate`` frozen at ``cap``."""
    if cap == 0 or rate == 0.0:
        return np.zeros((trials, times.size), dtype=np.int64)
    arrivals = np.cumsum(rng.exponential(1.0 / rate, size=(trials, cap)), axis=1)
    counts = np.empty((trials, times.size), dtype=np.int64)
    for i in range(trials):
        counts[i] = np.searchsorted(arrivals[i], times, side="right")
    return counts


def trajectories(P: int, beta: float, eta: float, config: SimConfig) -> TrajectoryStats:
    """Sample the stopped acquisition processes on ``[0, max(1, 1/eta)]``.

    No exhaustion is imposed (``N = P``); the two processes are independent
    Poisson streams with rates ``eta*beta*P`` and ``(1-beta)*P`` capped at
    their subpopulation sizes.
    """
    if int(P) != P or P < 1:
        raise ValidationError("P must be a positive integer")
    if not (0.0 <= beta <= 1.0):
        raise ValidationError("beta must lie in [0, 1]")
    if not (0.0 < eta <= 1.0):
        raise ValidationError("eta must lie in (0, 1]")
    P = int(P)
    d, a = split_population(P, beta)
    horizon = max(1.0, 1.0 / eta)
    times = np.linspace(0.0, horizon, config.time_resolution)

    # Keep each block's arrival matrix around a few million entries.
    per_block = max(1, min(BLOCK_TRIALS, 4_000_000 // max(1, P)))
    totals = np.empty((config.trials, times.size))
    advantaged = np.empty((config.trials, times.size))
    for b in range(math.ceil(config.trials / per_block)):
        lo = b * per_block
        hi = min(config.trials, lo + per_block)
        rng = block_generator(config.seed, b)
        u = _stopped_counts(rng, eta * d, d, times, hi - lo)
        v = _stopped_counts(rng, float(a), a, times, hi - lo)
        totals[lo:hi] = u + v
        advantaged[lo:hi] = v

    totals_sorted = np.sort(totals, axis=0)
    adv_sorted = np.sort(advantaged, axis=0)
    return TrajectoryStats(
        times=times,
        mean_total=totals.mean(axis=0),
        mean_advantaged=advantaged.mean(axis=0),
        p5_total=nearest_rank(totals_sorted, 5),
        p95_total=nearest_rank(totals_sorted, 95),
        p5_advantaged=nearest_rank(adv_sorted, 5),
        p95_advantaged=nearest_rank(adv_sorted, 95),
    )
