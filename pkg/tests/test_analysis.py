import numpy as np
import pytest

from accessalloc.analysis import ImpactParams, expected_adverse, slope_condition, soft_nn_interpolate
from accessalloc.engine import solve_access_aware
from accessalloc.errors import ValidationError
from accessalloc.model import Scenario, approx_rho_vector, rate_disparity

Q, Q_PRIME = 18 / 99, 78 / 415


def golden():
    return Scenario.from_arrays([1000, 1000, 1000], [0.2, 0.5, 0.8], alpha=0.7, epsilon=0.4)


def test_threshold_formula():
    threshold, positive = slope_condition(3.192, Q, Q_PRIME)
    assert threshold == pytest.approx((Q_PRIME - Q) / (1 - Q_PRIME), abs=1e-15)
    assert positive


def test_threshold_negative_when_resource_helps_disadvantaged_more():
    threshold, positive = slope_condition(0.0, 0.5, 0.3)
    assert threshold < 0 and positive


def test_slope_condition_rejects_useless_resource():
    with pytest.raises(ValidationError):
        slope_condition(1.0, 0.5, 1.0)


def test_useless_resource_gives_constant_adverse_count():
    sc = golden()
    x, delta = 0.01, 2.0
    D = float(np.dot(sc.betas, sc.populations))
    A = float(np.dot(1 - sc.betas, sc.populations))
    for n in (sc.p, np.array([2 / 15, 41 / 105, 10 / 21])):
        rho = approx_rho_vector(n, sc.p, sc.alpha, sc.betas, 0.5)
        value = expected_adverse((x, delta, 1.0, 1.0), sc, n, rho)
        assert value == pytest.approx(x * A + (1 + delta) * x * D)


def test_adverse_is_affine_in_rd_with_positive_slope():
    sc = golden()
    params = ImpactParams(0.01, 3.19192, Q, Q_PRIME)
    target, _ = solve_access_aware(sc, 0.5)
    pts = []
    for t in np.linspace(0, 1, 7):
        n = (1 - t) * sc.p + t * target.n
        rho = approx_rho_vector(n, sc.p, sc.alpha, sc.betas, 0.5)
        pts.append((rate_disparity(sc, n, rho), expected_adverse(params, sc, n, rho)))
    (x0, y0), (x1, y1) = pts[0], pts[-1]
    slope = (y1 - y0) / (x1 - x0)
    assert slope > 0
    for x, y in pts:
        assert y == pytest.approx(y0 + slope * (x - x0), abs=1e-9)


def test_impact_params_validation():
    with pytest.raises(ValidationError):
        ImpactParams(0.0, 1.0, 0.5, 0.5)
    with pytest.raises(ValidationError):
        ImpactParams(0.6, 1.0, 0.5, 0.5)
    with pytest.raises(ValidationError):
        ImpactParams(0.1, 1.0, 1.0, 0.5)


def test_expected_adverse_rejects_impossible_acquisition():
    sc = golden()
    with pytest.raises(ValidationError):
        expected_adverse((0.01, 1.0, 0.5, 0.5), sc, sc.p, np.ones(3))


def test_single_observation_is_constant():
    out = soft_nn_interpolate([(0.3, 2.5)], 20, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(out, 2.5)


def test_symmetric_observations_meet_in_the_middle():
    out = soft_nn_interpolate([(0.2, 1.0), (0.8, 3.0)], 20, [0.5, 0.2, 0.8])
    assert out[0] == pytest.approx(2.0)
    assert out[1] + out[2] == pytest.approx(4.0)


def test_large_lambda_picks_nearest_observation():
    pts = [(0.1, 5.0), (0.5, -1.0), (0.9, 7.0)]
    out = soft_nn_interpolate(pts, 1e4, [0.12, 0.48, 0.95])
    np.testing.assert_allclose(out, [5.0, -1.0, 7.0])


def test_weights_shift_the_estimate():
    plain = soft_nn_interpolate([(0.2, 1.0), (0.8, 3.0)], 5, [0.5])[0]
    weighted = soft_nn_interpolate([(0.2, 1.0, 1.0), (0.8, 3.0, 3.0)], 5, [0.5])[0]
    assert weighted > plain


def test_interpolation_rejects_bad_input():
    with pytest.raises(ValidationError):
        soft_nn_interpolate([], 20, [0.5])
    with pytest.raises(ValidationError):
        soft_nn_interpolate([(0.1, 1.0)], 0, [0.5])
    with pytest.raises(ValidationError):
        soft_nn_interpolate([(0.1, 1.0, 0.0)], 1, [0.5])
