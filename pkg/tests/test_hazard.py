import math

import numpy as np
import pytest

from spatialmsm.exceptions import DataError
from spatialmsm.hazard import (
    TransitionParams,
    cum_hazard,
    hazard,
    inv_cum_hazard,
    linear_predictor,
)


def test_exponential_case_constant_hazard():
    p = TransitionParams(shape=1.0, intercept=math.log(2.0))
    assert hazard(p, 0.0, 7.0) == pytest.approx(2.0)


def test_posterior_mean_fixture_point():
    # shape 0.776, scale 0.335 at t=1: h = shape * scale
    p = TransitionParams(shape=0.776, intercept=math.log(0.335))
    assert hazard(p, 0.0, 1.0) == pytest.approx(0.25996, abs=5e-6)


def test_hand_arithmetic_point():
    p = TransitionParams(shape=2.0, intercept=0.0)
    assert hazard(p, math.log(3.0), 0.5) == pytest.approx(3.0, rel=1e-12)


def test_cum_hazard_values():
    p = TransitionParams(shape=1.0, intercept=math.log(2.0))
    assert cum_hazard(p, 0.0, 0.0) == 0.0
    assert cum_hazard(p, 0.0, 3.0) == pytest.approx(6.0)
    p = TransitionParams(shape=0.5, intercept=math.log(4.0))
    assert cum_hazard(p, 0.0, 9.0) == pytest.approx(12.0)


def test_inverse_values():
    assert inv_cum_hazard(TransitionParams(1.0, math.log(2.0)), 0.0, 0.0) == 0.0
    assert inv_cum_hazard(TransitionParams(1.0, math.log(2.0)), 0.0, 6.0) == pytest.approx(3.0)
    assert inv_cum_hazard(TransitionParams(0.5, math.log(4.0)), 0.0, 12.0) == pytest.approx(9.0)


def test_round_trip_random_grid():
    rng = np.random.default_rng(12)
    for _ in range(200):
        p = TransitionParams(
            shape=float(rng.uniform(0.3, 3.0)), intercept=float(rng.uniform(-3.0, 1.0))
        )
        eta = float(rng.uniform(-1.0, 1.0))
        t = float(rng.uniform(1e-3, 50.0))
        back = inv_cum_hazard(p, eta, cum_hazard(p, eta, t))
        assert back == pytest.approx(t, rel=1e-12)


def test_cum_hazard_derivative_matches_hazard():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = TransitionParams(
            shape=float(rng.uniform(0.5, 2.5)), intercept=float(rng.uniform(-2.0, 1.0))
        )
        eta = float(rng.uniform(-1.0, 1.0))
        t = float(rng.uniform(0.1, 20.0))
        h = 1e-6 * t
        fd = (cum_hazard(p, eta, t + h) - cum_hazard(p, eta, t - h)) / (2 * h)
        assert fd == pytest.approx(hazard(p, eta, t), rel=1e-6)


def test_monotonicity_in_time():
    grid = np.linspace(0.1, 10.0, 40)
    decreasing = hazard(TransitionParams(0.7, 0.0), 0.0, grid)
    increasing = hazard(TransitionParams(1.5, 0.0), 0.0, grid)
    assert np.all(np.diff(decreasing) < 0)
    assert np.all(np.diff(increasing) > 0)
    # cumulative form is nondecreasing regardless of shape
    lam = cum_hazard(TransitionParams(0.7, 0.0), 0.0, grid)
    assert np.all(np.diff(lam) > 0)


def test_errors():
    p = TransitionParams(shape=0.8, intercept=0.0)
    with pytest.raises(DataError):
        hazard(p, 0.0, 0.0)
    with pytest.raises(DataError):
        hazard(p, 0.0, -1.0)
    with pytest.raises(DataError):
        cum_hazard(p, 0.0, -0.5)
    with pytest.raises(DataError):
        inv_cum_hazard(p, 0.0, -1.0)
    with pytest.raises(DataError):
        hazard(TransitionParams(-1.0, 0.0), 0.0, 1.0)


def test_linear_predictor_arity():
    p = TransitionParams(shape=1.0, intercept=0.0, coefficients=[0.5, -0.25])
    assert linear_predictor(p, np.array([2.0, 4.0]), b=0.1) == pytest.approx(0.1)
    with pytest.raises(DataError):
        linear_predictor(p, np.array([1.0]))
