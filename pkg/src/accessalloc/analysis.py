"""Downstream impact of disparity, and soft nearest-neighbour smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import Allocation, Scenario


@dataclass(frozen=True)
class ImpactParams:
    """Adverse-outcome probabilities with and without the resource.

    The advantaged suffer an adverse outcome with probability ``x`` and the
    disadvantaged with ``(1 + delta) x``; holding the resource multiplies
    these by ``q`` and ``q_prime`` respectively.
    """

    x: float
    delta: float
    q: float
    q_prime: float

    def __post_init__(self):
        if not (0.0 < self.x <= 1.0):
            raise ValidationError("x must lie in (0, 1]")
        if self.delta < 0:
            raise ValidationError("delta must be >= 0")
        if (1.0 + self.delta) * self.x > 1.0 + 1e-12:
            raise ValidationError("(1 + delta) x must not exceed 1")
        if not (0.0 < self.q < 1.0) or not (0.0 < self.q_prime < 1.0):
            raise ValidationError("q and q_prime must lie in (0, 1)")


def _adverse(x, delta, q, q_prime, A, D, V_a, V_d) -> float:
    return x * ((A - V_a) + q * V_a) + (1.0 + delta) * x * ((D - V_d) + q_prime * V_d)


def expected_adverse(
    impact: ImpactParams | tuple[float, float, float, float],
    scenario: Scenario,
    allocation: Allocation | np.ndarray,
    rho,
) -> float:
    """Expected number of adverse outcomes across the whole population.

    ``impact`` may also be a raw ``(x, delta, q, q_prime)`` tuple, which skips
    the open-interval checks on ``q`` (useful for the ``q = 1`` sanity case).
    """
    if isinstance(impact, ImpactParams):
        x, delta, q, q_prime = impact.x, impact.delta, impact.q, impact.q_prime
    else:
        x, delta, q, q_prime = (float(v) for v in impact)
    n = allocation.n if isinstance(allocation, Allocation) else np.asarray(allocation, dtype=float)
    rho = np.asarray(rho, dtype=float)
    populations = scenario.populations
    D = float(np.dot(scenario.betas, populations))
    A = float(np.dot(1.0 - scenario.betas, populations))
    units = n * scenario.total_resources
    V_d = float(np.dot(rho, units))
    V_a = scenario.total_resources - V_d
    if V_d > D + 1e-6 or V_a > A + 1e-6:
        raise ValidationError("acquisition exceeds a subpopulation's size")
    return _adverse(x, delta, q, q_prime, A, D, V_a, V_d)


def slope_condition(delta: float, q: float, q_prime: float) -> tuple[float, bool]:
    """Threshold on ``delta`` above which adverse outcomes increase with RD."""
    if q_prime >= 1.0:
        raise ValidationError("q_prime must be < 1 (a useless resource has no threshold)")
    threshold = (q_prime - q) / (1.0 - q_prime)
    return threshold, delta > threshold


def soft_nn_interpolate(points, lam: float, query) -> np.ndarray:
    """Exponential-kernel weighted average of observations.

    ``points`` is a sequence of ``(beta, y)`` or ``(beta, y, weight)``;
    ``yhat(b) = sum_j w_j y_j exp(-lam |b - beta_j|) / sum_j w_j exp(-lam |b - beta_j|)``.
    """
    if lam <= 0:
        raise ValidationError("lambda must be positive")
    pts = [tuple(pt) for pt in points]
    if not pts:
        raise ValidationError("at least one observation is required")
    beta = np.array([pt[0] for pt in pts], dtype=float)
    y = np.array([pt[1] for pt in pts], dtype=float)
    w = np.array([pt[2] if len(pt) > 2 else 1.0 for pt in pts], dtype=float)
    if np.any(w < 0) or not np.any(w > 0):
        raise ValidationError("observation weights must be nonnegative and not all zero")
    query = np.atleast_1d(np.asarray(query, dtype=float))
    dist = np.abs(query[:, None] - beta[None, :])
    # Shift by the nearest distance so the largest kernel value is 1.
    logk = -lam * (dist - dist.min(axis=1, keepdims=True))
    kern = w[None, :] * np.exp(logk)
    return kern @ y / kern.sum(axis=1)
