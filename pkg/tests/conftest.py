import math

import numpy as np
import pytest

from spatialmsm.gmrf import BetweenCov, LerouxMix, RandomEffects
from spatialmsm.graph import SpatialGraph
from spatialmsm.hazard import TransitionParams
from spatialmsm.likelihood import ModelState


@pytest.fixture
def path3() -> SpatialGraph:
    return SpatialGraph(n_regions=3, edges=((0, 1), (1, 2)))


def make_state(
    shapes=(1.0, 1.0, 1.0),
    intercepts=(0.0, 0.0, 0.0),
    coefficients=None,
    effects=None,
    gamma=0.5,
    tau=(1.0, 1.0, 1.0),
    rho=(0.0, 0.0, 0.0),
    n_regions=3,
) -> ModelState:
    L = 0 if coefficients is None else len(coefficients[0])
    coefficients = coefficients if coefficients is not None else [[]] * 3
    params = tuple(
        TransitionParams(shape=shapes[j], intercept=intercepts[j], coefficients=coefficients[j])
        for j in range(3)
    )
    values = np.zeros((n_regions, 3)) if effects is None else np.asarray(effects, dtype=float)
    return ModelState(
        params=params,
        effects=RandomEffects(values=values),
        mix=LerouxMix(gamma=gamma),
        between=BetweenCov(precisions=np.asarray(tau, float), correlations=np.asarray(rho, float)),
    )


def markov_p12(a: float, b: float, c: float, t: float) -> float:
    """Closed-form occupation probability of the illness state when all
    shapes are 1 (constant rates a=1->2, b=1->3, c=2->3)."""
    if t == 0:
        return 0.0
    d = a + b - c
    if abs(d) < 1e-12:
        return a * t * math.exp(-c * t)
    return a * math.exp(-c * t) * -math.expm1(-d * t) / d
