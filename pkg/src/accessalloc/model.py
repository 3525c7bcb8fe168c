"""Domain types and closed-form mathematics of the access model.

A *location* has ``P`` people, a fraction ``beta`` of whom are disadvantaged.
Allocated resources are acquired by two competing Poisson processes, the
disadvantaged one slowed by the access gap ``eta``.  The acquisition function
``rho`` is the expected share of a location's resources that ends up with the
disadvantaged.  Three versions are provided:

* ``naive_rho``  - scarce-resource limit, no saturation: ``eta*beta/(eta*beta + 1 - beta)``
* ``exact_rho``  - stopped processes with integer populations, via binomial tails
* ``approx_rho`` - large-population limit, ``max(naive, 1 - (1-beta)p/(alpha n))``

Rate disparity (RD) is the advantaged per-capita acquisition rate minus the
disadvantaged one, aggregated over all locations.  For a fixed ``rho`` vector it
is linear in the allocation, ``RD = sum_j c_j n_j``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError

#: Absolute tolerance for fraction comparisons.
TOL = 1e-9


class Distance(str, enum.Enum):
    """Deviation-from-proportionality measure."""

    L1 = "l1"
    LINF = "linf"


class RhoModel(str, enum.Enum):
    NAIVE = "naive"
    APPROX = "approx"
    EXACT = "exact"
    SIMULATED = "simulated"


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LocationProfile:
    id: str
    population: int
    beta: float

    def __post_init__(self):
        if isinstance(self.population, bool) or int(self.population) != self.population:
            raise ValidationError(f"location {self.id!r}: population must be an integer")
        if self.population < 1:
            raise ValidationError(f"location {self.id!r}: population must be >= 1")
        if not (0.0 <= self.beta <= 1.0) or math.isnan(self.beta):
            raise ValidationError(f"location {self.id!r}: beta must lie in [0, 1], got {self.beta}")
        object.__setattr__(self, "population", int(self.population))
        object.__setattr__(self, "beta", float(self.beta))


@dataclass(frozen=True)
class EtaSpec:
    """Access gap given as a single value, a grid, or a discrete distribution.

    ``weights is None`` means point (one value) or grid (several values).
    """

    values: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError("eta specification needs at least one value")
        for v in values:
            if not (0.0 < v <= 1.0):
                raise ValidationError(f"eta values must lie in (0, 1], got {v}")
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if len(weights) != len(values):
                raise ValidationError("eta distribution: values and weights differ in length")
            if any(w < 0 for w in weights):
                raise ValidationError("eta distribution: weights must be nonnegative")
            if abs(math.fsum(weights) - 1.0) > 1e-12:
                raise ValidationError("eta distribution: weights must sum to 1")
            object.__setattr__(self, "weights", weights)

    @classmethod
    def point(cls, eta: float) -> "EtaSpec":
        return cls((eta,))

    @classmethod
    def grid(cls, etas: Sequence[float]) -> "EtaSpec":
        return cls(tuple(etas))

    @classmethod
    def distribution(cls, etas: Sequence[float], weights: Sequence[float]) -> "EtaSpec":
        return cls(tuple(etas), tuple(weights))

    @property
    def kind(self) -> str:
        if self.weights is not None:
            return "distribution"
        return "point" if len(self.values) == 1 else "grid"

    @property
    def probabilities(self) -> tuple[float, ...]:
        """Weights, uniform when none were given."""
        if self.weights is not None:
            return self.weights
        return tuple(1.0 / len(self.values) for _ in self.values)


@dataclass(frozen=True)
class Scenario:
    """A complete allocation problem instance.

    ``alpha`` is the resource availability ``N_total / P_total``.  ``alpha == 1``
    is accepted so that full-coverage impact calculations can be expressed, but
    the allocation engine requires ``alpha < 1``.
    """

    locations: tuple[LocationProfile, ...]
    alpha: float
    epsilon: float = 0.0
    distance: Distance = Distance.L1
    eta: EtaSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "locations", tuple(self.locations))
        if not self.locations:
            raise ValidationError("scenario needs at least one location")
        ids = [loc.id for loc in self.locations]
        if len(set(ids)) != len(ids):
            raise ValidationError("location ids must be unique")
        if not (0.0 < self.alpha <= 1.0):
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.epsilon >= 0.0):
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        object.__setattr__(self, "distance", Distance(self.distance))
        if self.eta is not None and not isinstance(self.eta, EtaSpec):
            object.__setattr__(self, "eta", EtaSpec.point(float(self.eta)))

    @classmethod
    def from_arrays(
        cls,
        populations,
        betas,
        alpha: float,
        epsilon: float = 0.0,
        distance: Distance | str = Distance.L1,
        eta: EtaSpec | float | None = None,
        ids: Sequence[str] | None = None,
    ) -> "Scenario":
        populations = list(populations)
        betas = list(betas)
        if len(populations) != len(betas):
            raise ValidationError("populations and betas differ in length")
        if ids is None:
            ids = [str(j + 1) for j in range(len(populations))]
        locations = tuple(
            LocationProfile(str(i), int(pop), float(b)) for i, pop, b in zip(ids, populations, betas)
        )
        return cls(locations, alpha, epsilon, Distance(distance), eta)

    def replace(self, **changes) -> "Scenario":
        fields = dict(
            locations=self.locations,
            alpha=self.alpha,
            epsilon=self.epsilon,
            distance=self.distance,
            eta=self.eta,
        )
        fields.update(changes)
        return Scenario(**fields)

    @property
    def k(self) -> int:
        return len(self.locations)

    @cached_property
    def populations(self) -> np.ndarray:
        return _readonly([loc.population for loc in self.locations])

    @cached_property
    def betas(self) -> np.ndarray:
        return _readonly([loc.beta for loc in self.locations])

    @cached_property
    def total_population(self) -> float:
        return float(sum(loc.population for loc in self.locations))

    @property
    def total_resources(self) -> float:
        return self.alpha * self.total_population

    @cached_property
    def p(self) -> np.ndarray:
        return _readonly(self.populations / self.total_population)

    @property
    def ids(self) -> list[str]:
        return [loc.id for loc in self.locations]


@dataclass(frozen=True, eq=False)
class Allocation:
    """Fractions ``n_j`` of the total resource, on the probability simplex."""

    n: np.ndarray

    def __post_init__(self):
        n = np.array(self.n, dtype=float).ravel()
        if n.size == 0:
            raise ValidationError("allocation is empty")
        if np.any(~np.isfinite(n)):
            raise ValidationError("allocation contains non-finite entries")
        if np.any(n < -TOL):
            raise ValidationError(f"allocation has negative entries: min {n.min():.3g}")
        if abs(n.sum() - 1.0) > TOL:
            raise ValidationError(f"allocation must sum to 1, sums to {n.sum():.12g}")
        n = np.clip(n, 0.0, None)
        n.setflags(write=False)
        object.__setattr__(self, "n", n)

    def __len__(self) -> int:
        return self.n.size

    def resources(self, scenario: Scenario) -> np.ndarray:
        """Absolute amounts ``N_j = n_j * N_total``."""
        return self.n * scenario.total_resources


@dataclass(frozen=True, eq=False)
class AcquisitionOutcome:
    """Per-location acquisition fractions and the model that produced them.

    ``eta`` is kept so that baselines can be re-evaluated under the same model.
    """

    rho: np.ndarray
    model: RhoModel = RhoModel.NAIVE
    eta: float | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float).ravel()
        if np.any(rho < -TOL) or np.any(rho > 1 + TOL):
            raise ValidationError("acquisition fractions must lie in [0, 1]")
        rho = np.clip(rho, 0.0, 1.0)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "model", RhoModel(self.model))


@dataclass(frozen=True, eq=False)
class DisparityReport:
    rd: float
    c: np.ndarray
    d1: float
    dinf: float
    rd_proportional: float


@dataclass(frozen=True)
class Violation:
    kind: str  # "simplex", "nonnegative", "distance", "no_waste", "length"
    index: int | None
    value: float
    bound: float

    def __str__(self) -> str:
        where = "" if self.index is None else f" at j={self.index + 1}"
        return f"{self.kind} violated{where} ({self.value:.12g} > {self.bound:.12g})"


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.feasible


# ---------------------------------------------------------------------------
# Acquisition functions
# ---------------------------------------------------------------------------


def _check_eta(eta) -> None:
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(~(eta_arr > 0.0)) or np.any(eta_arr > 1.0):
        raise ValidationError(f"eta must lie in (0, 1], got {eta}")


def _check_beta(beta) -> None:
    beta_arr = np.asarray(beta, dtype=float)
    if np.any(~(beta_arr >= 0.0)) or np.any(beta_arr > 1.0):
        raise ValidationError(f"beta must lie in [0, 1], got {beta}")


def naive_rho(beta, eta):
    """Share acquired by the disadvantaged when saturation never happens.

    Accepts scalars or arrays (broadcast).  Returns a float for scalar input.
    """
    _check_beta(beta)
    _check_eta(eta)
    beta_arr = np.asarray(beta, dtype=float)
    eta_arr = np.asarray(eta, dtype=float)
    num = eta_arr * beta_arr
    out = num / (num + (1.0 - beta_arr))
    if out.ndim == 0:
        return float(out)
    return out


def binom_sf(k: int, n: int, q: float) -> float:
    """``P(X > k)`` for ``X ~ Binomial(n, q)``, summed in log space.

    Works for ``k`` outside ``[0, n)`` (returns exactly 0 or 1) and for
    ``q`` in ``{0, 1}``.
    """
    if n < 0:
        raise ValidationError("binomial trial count must be >= 0")
    if not (0.0 <= q <= 1.0):
        raise ValidationError(f"binomial probability must lie in [0, 1], got {q}")
    if k < 0:
        return 1.0
    if k >= n:
        return 0.0
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    # Sum whichever tail is lighter; the heavy one loses digits near 1.
    upper = k + 1 > n * q
    i = np.arange(k + 1, n + 1, dtype=float) if upper else np.arange(0, k + 1, dtype=float)
    log_terms = (
        gammaln(n + 1.0)
        - gammaln(i + 1.0)
        - gammaln(n - i + 1.0)
        + i * math.log(q)
        + (n - i) * math.log1p(-q)
    )
    top = float(log_terms.max())
    tail = math.exp(top) * float(np.exp(log_terms - top).sum())
    return min(1.0, tail) if upper else max(0.0, 1.0 - tail)


def split_population(P: int, beta: float) -> tuple[int, int]:
    """Integer (disadvantaged, advantaged) sizes; ``beta*P`` rounded half up."""
    disadvantaged = int(math.floor(beta * P + 0.5))
    disadvantaged = min(max(disadvantaged, 0), P)
    return disadvantaged, P - disadvantaged


def exact_rho(N: int, P: int, beta: float, eta: float) -> float:
    """Exact expected disadvantaged share of ``N`` units at a location of ``P``.

    Acquisition stops at exhaustion (``N`` units taken) and each subpopulation
    stops at saturation.  ``beta*P`` is rounded to the nearest integer and the
    acquisition probabilities use the rounded fraction.
    """
    if int(N) != N or int(P) != P:
        raise ValidationError("N and P must be integers")
    N, P = int(N), int(P)
    if N < 1:
        raise ValidationError("N must be >= 1")
    if N > P:
        raise ValidationError(f"N={N} exceeds P={P} (no-waste violated)")
    _check_beta(beta)
    _check_eta(eta)
    d, a = split_population(P, beta)
    if d == 0:
        return 0.0
    if a == 0:
        return 1.0
    r = naive_rho(d / P, eta)
    rho = (
        r
        - r * binom_sf(d - 1, N - 1, r)
        + d / N * binom_sf(d, N, r)
        + (1.0 - r) * binom_sf(a - 1, N - 1, 1.0 - r)
        - a / N * binom_sf(a, N, 1.0 - r)
    )
    return float(min(1.0, max(0.0, rho)))


def approx_rho(n: float, p: float, alpha: float, beta: float, eta: float) -> float:
    """Large-population acquisition share: exhaustion branch vs saturation branch."""
    if not p > 0:
        raise ValidationError("p must be positive")
    if n < 0:
        raise ValidationError("n must be nonnegative")
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    if alpha * n / p > 1.0 + TOL:
        raise ValidationError(f"alpha*n/p = {alpha * n / p:.6g} > 1 (no-waste violated)")
    r = naive_rho(beta, eta)
    if n == 0:
        return r
    return max(r, 1.0 - (1.0 - beta) * p / (alpha * n))


def approx_rho_vector(n, p, alpha: float, beta, eta: float) -> np.ndarray:
    """Vectorised :func:`approx_rho` without per-element validation."""
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    beta = np.asarray(beta, dtype=float)
    r = naive_rho(beta, eta) * np.ones_like(n)
    with np.errstate(divide="ignore"):
        saturated = np.where(n > 0, 1.0 - (1.0 - beta) * p / (alpha * np.where(n > 0, n, 1.0)), -np.inf)
    return np.maximum(r, saturated)


def acquisition(
    scenario: Scenario,
    allocation: Allocation | np.ndarray,
    eta: float,
    model: RhoModel | str = RhoModel.APPROX,
) -> AcquisitionOutcome:
    """Evaluate the acquisition fractions of every location under ``model``.

    The exact model rounds ``N_j`` to the nearest integer; locations that
    receive no whole unit take the naive value (the ``N -> 0`` limit).
    """
    model = RhoModel(model)
    n = allocation.n if isinstance(allocation, Allocation) else np.asarray(allocation, dtype=float)
    betas = scenario.betas
    if model is RhoModel.NAIVE:
        rho = naive_rho(betas, eta)
    elif model is RhoModel.APPROX:
        rho = np.array(
            [approx_rho(nj, pj, scenario.alpha, bj, eta) for nj, pj, bj in zip(n, scenario.p, betas)]
        )
    elif model is RhoModel.EXACT:
        rho = np.empty(scenario.k)
        units = n * scenario.total_resources
        for j, loc in enumerate(scenario.locations):
            Nj = min(int(math.floor(units[j] + 0.5)), loc.population)
            rho[j] = naive_rho(loc.beta, eta) if Nj < 1 else exact_rho(Nj, loc.population, loc.beta, eta)
    else:
        raise ValidationError("simulated outcomes are produced by accessalloc.sim")
    return AcquisitionOutcome(np.asarray(rho, dtype=float), model, float(eta))


# ---------------------------------------------------------------------------
# Disparity and distances
# ---------------------------------------------------------------------------


def _group_weights(scenario: Scenario) -> tuple[float, float]:
    """``(sum beta_j p_j, sum (1-beta_j) p_j)``; both must be positive."""
    dis = float(np.dot(scenario.betas, scenario.p))
    adv = float(np.dot(1.0 - scenario.betas, scenario.p))
    if dis <= 0.0 or adv <= 0.0:
        raise ValidationError(
            "rate disparity needs both subpopulations present somewhere "
            "(all-zero or all-one beta aggregates)"
        )
    return dis, adv


def disparity_coefficients(scenario: Scenario, rho) -> np.ndarray:
    """Per-location coefficients ``c_j`` with ``RD = sum_j c_j n_j``."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (scenario.k,):
        raise ValidationError(f"rho must have length {scenario.k}")
    dis, adv = _group_weights(scenario)
    return scenario.alpha * ((1.0 - rho) / adv - rho / dis)


def rate_disparity(scenario: Scenario, n, rho) -> float:
    """RD from the two aggregate per-capita acquisition rates."""
    n = np.asarray(n, dtype=float)
    rho = np.asarray(rho, dtype=float)
    dis, adv = _group_weights(scenario)
    advantaged_rate = scenario.alpha * float(np.dot(1.0 - rho, n)) / adv
    disadvantaged_rate = scenario.alpha * float(np.dot(rho, n)) / dis
    return advantaged_rate - disadvantaged_rate


def distance_l1(n, p) -> float:
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    if n.shape != p.shape:
        raise ValidationError("n and p differ in length")
    return float(np.abs(n - p).sum())


def distance_linf(n, p) -> float:
    """Relative sup distance ``max_j |n_j/p_j - 1|``."""
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    if n.shape != p.shape:
        raise ValidationError("n and p differ in length")
    if np.any(p <= 0):
        raise ValidationError("relative distance needs strictly positive p")
    return float(np.max(np.abs(n / p - 1.0)))


def distance(kind: Distance | str, n, p) -> float:
    return distance_l1(n, p) if Distance(kind) is Distance.L1 else distance_linf(n, p)


def disparity(
    scenario: Scenario, allocation: Allocation | np.ndarray, outcome: AcquisitionOutcome
) -> DisparityReport:
    """Full disparity report for ``allocation`` under the given acquisition.

    ``rd_proportional`` re-evaluates the acquisition at ``n = p`` under the same
    model when the outcome records its ``eta``; otherwise the given ``rho`` is
    reused as if it did not depend on the allocation.  Simulated outcomes are
    benchmarked against the exact model, which is their expectation.
    """
    n = allocation.n if isinstance(allocation, Allocation) else np.asarray(allocation, dtype=float)
    if n.shape != (scenario.k,):
        raise ValidationError(f"allocation must have length {scenario.k}")
    rho = outcome.rho
    c = disparity_coefficients(scenario, rho)
    rd = rate_disparity(scenario, n, rho)
    linear = float(np.dot(c, n))
    if abs(rd - linear) > TOL:
        raise AssertionError(f"RD forms disagree: {rd!r} vs {linear!r}")

    p = scenario.p
    if outcome.eta is None:
        rho_prop = rho
    else:
        base_model = RhoModel.EXACT if outcome.model is RhoModel.SIMULATED else outcome.model
        rho_prop = acquisition(scenario, p, outcome.eta, base_model).rho
    return DisparityReport(
        rd=rd,
        c=c,
        d1=distance_l1(n, p),
        dinf=distance_linf(n, p),
        rd_proportional=rate_disparity(scenario, p, rho_prop),
    )


def rd_approx(scenario: Scenario, n, eta: float) -> float:
    """RD of ``n`` with acquisition under the approximate model."""
    rho = approx_rho_vector(n, scenario.p, scenario.alpha, scenario.betas, eta)
    return rate_disparity(scenario, n, rho)


def is_feasible(scenario: Scenario, allocation: Allocation | np.ndarray, tol: float = TOL) -> Feasibility:
    """Check simplex membership, the distance budget and the no-waste caps."""
    n = allocation.n if isinstance(allocation, Allocation) else np.asarray(allocation, dtype=float).ravel()
    if n.shape != (scenario.k,):
        return Feasibility(False, (Violation("length", None, float(n.size), float(scenario.k)),))
    p = scenario.p
    violations: list[Violation] = []
    for j in np.flatnonzero(n < -tol):
        violations.append(Violation("nonnegative", int(j), float(-n[j]), 0.0))
    total = float(n.sum())
    if abs(total - 1.0) > tol:
        violations.append(Violation("simplex", None, total, 1.0))
    dist = distance(scenario.distance, n, p)
    if dist > scenario.epsilon + tol:
        violations.append(Violation("distance", None, dist, scenario.epsilon))
    used = scenario.alpha * n
    for j in np.flatnonzero(used > p + tol):
        violations.append(Violation("no_waste", int(j), float(used[j]), float(p[j])))
    return Feasibility(not violations, tuple(violations))
