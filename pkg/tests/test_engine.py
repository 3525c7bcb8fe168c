import numpy as np
import pytest

from accessalloc.engine import (
    EngineConfig,
    expected_rd,
    project_to_simplex,
    proportional,
    solve_access_aware,
    solve_bayesian,
    solve_minimax,
    solve_naive,
    sweep_eta,
)
from accessalloc.errors import ValidationError
from accessalloc.model import EtaSpec, Scenario, distance_l1, is_feasible, rd_approx
from accessalloc.optimize import enumerate_vertices

GOLDEN_N = np.array([2 / 15, 41 / 105, 10 / 21])


def golden(**kw):
    return Scenario.from_arrays([1000, 1000, 1000], [0.2, 0.5, 0.8], alpha=0.7, epsilon=0.4, **kw)


def random_scenario(rng, k, distance="l1", alpha=0.5, epsilon=0.1):
    return Scenario.from_arrays(rng.integers(100, 10000, k), rng.uniform(0.05, 0.95, k), alpha=alpha,
                                epsilon=epsilon, distance=distance)


@pytest.mark.parametrize("eta", [0.05, 0.3, 0.5, 0.75, 0.95])
def test_golden_allocation(eta):
    allocation, trace = solve_access_aware(golden(), eta)
    np.testing.assert_allclose(allocation.n, GOLDEN_N, atol=1e-9)
    assert distance_l1(allocation.n, golden().p) == pytest.approx(0.4, abs=1e-9)
    assert trace.converged
    # Saturation means coverage above eta*beta + 1 - beta.
    coverage = 0.7 * GOLDEN_N / (1 / 3)
    expected = {j for j, b in enumerate((0.2, 0.5, 0.8)) if coverage[j] > eta * b + 1 - b}
    assert trace.saturated == frozenset(expected)
    assert 2 in expected and 0 not in expected


def test_zero_budget_returns_proportional():
    sc = golden().replace(epsilon=0.0)
    allocation, _ = solve_access_aware(sc, 0.5)
    np.testing.assert_allclose(allocation.n, sc.p, atol=1e-12)
    assert rd_approx(sc, allocation.n, 0.5) == pytest.approx(rd_approx(sc, sc.p, 0.5), abs=1e-12)


def test_naive_solution_minimises_naive_rd_over_vertices():
    rng = np.random.default_rng(2)
    sc = random_scenario(rng, 5, epsilon=0.2)
    allocation, report = solve_naive(sc, 0.4)
    values = [float(report.c @ v.n) for v in enumerate_vertices(sc)]
    assert report.rd == pytest.approx(min(values), abs=1e-12)
    assert report.rd <= report.rd_proportional + 1e-12


def test_heuristic_never_worse_than_proportional():
    rng = np.random.default_rng(4)
    for i in range(20):
        sc = random_scenario(rng, int(rng.integers(2, 9)), "l1" if i % 2 else "linf", alpha=rng.uniform(0.1, 0.9))
        eta = float(rng.uniform(0.05, 1.0))
        allocation, _ = solve_access_aware(sc, eta)
        assert is_feasible(sc, allocation, tol=1e-9)
        assert rd_approx(sc, allocation.n, eta) <= rd_approx(sc, sc.p, eta) + 1e-9


def test_restarts_are_deterministic_and_not_worse():
    rng = np.random.default_rng(9)
    sc = random_scenario(rng, 6)
    base, _ = solve_access_aware(sc, 0.3)
    cfg = EngineConfig(restarts=10, seed=42)
    a, trace_a = solve_access_aware(sc, 0.3, cfg)
    b, trace_b = solve_access_aware(sc, 0.3, cfg)
    assert np.array_equal(a.n, b.n)
    assert trace_a.restart_index_of_best == trace_b.restart_index_of_best
    assert trace_a.runs == 11
    assert rd_approx(sc, a.n, 0.3) <= rd_approx(sc, base.n, 0.3) + 1e-12


def test_trace_records_each_iteration():
    _, trace = solve_access_aware(golden(), 0.5, EngineConfig(max_iterations=1))
    assert len(trace.iterations) == 1
    assert not trace.converged


def test_engine_config_validation():
    with pytest.raises(ValidationError):
        EngineConfig(restarts=-1)
    with pytest.raises(ValidationError):
        EngineConfig(max_iterations=0)


def test_allocation_requires_scarcity():
    sc = golden().replace(alpha=1.0)
    with pytest.raises(ValidationError):
        solve_access_aware(sc, 0.5)


def test_sweep_on_golden_is_stable():
    sc = golden(eta=EtaSpec.grid([0.1, 0.4, 0.7]))
    result = sweep_eta(sc)
    assert result.allocation_stable
    assert [row.eta for row in result.rows] == [0.1, 0.4, 0.7]
    for row in result.rows:
        assert row.improvement >= -1e-9
        assert row.rd_proportional == pytest.approx(rd_approx(sc, sc.p, row.eta))


def test_bayesian_point_mass_equals_point_solve():
    rng = np.random.default_rng(1)
    for _ in range(5):
        sc = random_scenario(rng, 5, epsilon=0.2)
        point, _ = solve_access_aware(sc, 0.35)
        bayes = solve_bayesian(sc, etas=[0.35], weights=[1.0])
        np.testing.assert_allclose(bayes.allocation.n, point.n, atol=1e-9)


def test_bayesian_zero_weight_component_is_ignored():
    sc = golden()
    a = solve_bayesian(sc, etas=[0.2, 0.8], weights=[1.0, 0.0])
    b, _ = solve_access_aware(sc, 0.2)
    np.testing.assert_allclose(a.allocation.n, b.n, atol=1e-9)


def test_expected_rd_is_weighted_sum():
    sc = golden()
    value = expected_rd(sc, sc.p, [0.2, 0.6], [0.25, 0.75])
    assert value == pytest.approx(0.25 * rd_approx(sc, sc.p, 0.2) + 0.75 * rd_approx(sc, sc.p, 0.6))


def test_bayesian_rejects_bad_weights():
    with pytest.raises(ValidationError):
        solve_bayesian(golden(), etas=[0.2, 0.8], weights=[0.5, 0.6])


def test_project_to_simplex():
    np.testing.assert_allclose(project_to_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    np.testing.assert_allclose(project_to_simplex([2.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(project_to_simplex([0.5, 0.5, 0.5]), [1 / 3] * 3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.normal(size=5) * 3
        x = project_to_simplex(v)
        assert x.min() >= 0 and x.sum() == pytest.approx(1.0)


def test_minimax_weak_duality_small():
    rng = np.random.default_rng(12)
    sc = random_scenario(rng, 3, epsilon=0.2)
    res = solve_minimax(sc, EngineConfig(minimax_steps=40), etas=[0.2, 0.8])
    assert res.weak_duality_holds
    assert res.primal_value >= res.maximin_value - 1e-6
    assert res.distribution.sum() == pytest.approx(1.0)
    assert res.bound == (res.maximin_value, 2 * res.maximin_value)


def test_minimax_needs_two_values():
    with pytest.raises(ValidationError):
        solve_minimax(golden(), etas=[0.5])


def test_proportional():
    sc = golden()
    np.testing.assert_allclose(proportional(sc).n, sc.p)
