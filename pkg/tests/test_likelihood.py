import math

import numpy as np
import pytest

from conftest import make_state
from spatialmsm.exceptions import DataError
from spatialmsm.gmrf import BetweenCov, LerouxMix
from spatialmsm.graph import grid_graph
from spatialmsm.hazard import TransitionParams
from spatialmsm.likelihood import (
    CohortData,
    Subject,
    cohort_loglik,
    cohort_loglik_grad,
    subject_loglik,
)
from spatialmsm.simulate import CovariateGen, SimConfig, simulate_cohort


def test_censored_contribution():
    m = make_state()
    s = Subject(region=0, covariates=[], t1=1.0, e1=0)
    assert subject_loglik(s, m) == pytest.approx(-2.0)


def test_death_contribution():
    m = make_state()
    s = Subject(region=0, covariates=[], t1=1.0, e1=2)
    assert subject_loglik(s, m) == pytest.approx(-2.0)


def test_illness_then_death_contribution():
    m = make_state()
    s = Subject(region=0, covariates=[], t1=1.0, e1=1, t2=1.0, e2=1)
    assert subject_loglik(s, m) == pytest.approx(-3.0)


def test_illness_then_censored_contribution():
    m = make_state()
    s = Subject(region=0, covariates=[], t1=1.0, e1=1, t2=2.0, e2=0)
    # log h12(1) - L12(1) - L13(1) - L23(2) = 0 - 2 - 2
    assert subject_loglik(s, m) == pytest.approx(-4.0)


def test_empty_cohort():
    assert cohort_loglik([], make_state()) == 0.0


def test_two_identical_subjects_double():
    m = make_state(shapes=(0.8, 1.2, 1.0), intercepts=(-0.5, 0.2, 0.1))
    s = Subject(region=1, covariates=[], t1=2.0, e1=1, t2=0.7, e2=1)
    assert cohort_loglik([s, s], m) == pytest.approx(2 * subject_loglik(s, m), rel=1e-12)


def _naive_loglik(subjects, shapes, intercepts, coefs, effects):
    """Straight-line re-implementation from the closed forms, no shared code."""
    total = 0.0
    for s in subjects:
        for j, (a, b0, bet) in enumerate(zip(shapes, intercepts, coefs)):
            eta = sum(xv * bv for xv, bv in zip(s.covariates, bet)) + effects[s.region][j]
            lam = math.exp(b0 + eta)
            if j < 2:
                t, d = s.t1, (s.e1 == 1 if j == 0 else s.e1 == 2)
            else:
                if s.e1 != 1:
                    continue
                t, d = s.t2, s.e2 == 1
            total -= lam * t**a
            if d:
                total += math.log(a * lam * t ** (a - 1.0))
    return total


def test_cohort_matches_naive_oracle():
    g = grid_graph(2, 2)
    rng = np.random.default_rng(17)
    effects = 0.4 * rng.normal(size=(4, 3))
    shapes = (0.9, 1.3, 0.7)
    intercepts = (-1.0, -0.4, -0.2)
    coefs = [[0.3, -0.1], [0.2, 0.05], [-0.25, 0.1]]
    params = tuple(
        TransitionParams(shape=shapes[j], intercept=intercepts[j], coefficients=coefs[j])
        for j in range(3)
    )
    cfg = SimConfig(
        graph=g,
        params=params,
        n_subjects=1000,
        seed=8,
        covariates=(
            CovariateGen("sex", "bernoulli", p=0.5),
            CovariateGen("z", "normal", mean=0.0, sd=1.0),
        ),
        effects=None,
        mix=LerouxMix(0.5),
        between=BetweenCov(np.ones(3) * 4.0, np.zeros(3)),
        horizon=6.0,
    )
    subjects, truth = simulate_cohort(cfg)
    m = make_state(
        shapes=shapes, intercepts=intercepts, coefficients=coefs, effects=effects, n_regions=4
    )
    fast = cohort_loglik(subjects, m)
    slow = _naive_loglik(subjects, shapes, intercepts, coefs, effects)
    assert fast == pytest.approx(slow, rel=1e-10)
    assert fast == pytest.approx(sum(subject_loglik(s, m) for s in subjects), rel=1e-10)


def test_order_and_chunk_invariance():
    g = grid_graph(2, 2)
    params = tuple(TransitionParams(1.0, -0.5, [0.2]) for _ in range(3))
    cfg = SimConfig(
        graph=g,
        params=params,
        n_subjects=500,
        seed=4,
        covariates=(CovariateGen("sex", "bernoulli", p=0.5),),
        mix=LerouxMix(0.2),
        between=BetweenCov(np.ones(3), np.zeros(3)),
        horizon=5.0,
    )
    subjects, _ = simulate_cohort(cfg)
    m = make_state(coefficients=[[0.1], [0.2], [0.3]], n_regions=4)
    full = cohort_loglik(subjects, m)
    rng = np.random.default_rng(0)
    perm = list(rng.permutation(len(subjects)))
    shuffled = cohort_loglik([subjects[i] for i in perm], m)
    assert shuffled == pytest.approx(full, rel=1e-10)
    chunked = sum(cohort_loglik(subjects[i : i + 37], m) for i in range(0, len(subjects), 37))
    assert chunked == pytest.approx(full, rel=1e-10)


def test_censored_contribution_equals_sojourn_survival():
    from spatialmsm.outcomes import Profile, sojourn_survival

    m = make_state(shapes=(0.8, 1.1, 1.0), intercepts=(-0.7, -0.3, 0.0))
    s = Subject(region=2, covariates=[], t1=2.5, e1=0)
    prof = Profile(covariates=[], region=2)
    assert math.exp(subject_loglik(s, m)) == pytest.approx(
        sojourn_survival(m, prof, 2.5), rel=1e-10
    )


def test_gradients_match_central_differences():
    g = grid_graph(2, 2)
    params = (
        TransitionParams(0.9, -1.0, [0.3, -0.2]),
        TransitionParams(1.2, -0.5, [0.1, 0.05]),
        TransitionParams(0.7, -0.2, [-0.3, 0.15]),
    )
    cfg = SimConfig(
        graph=g,
        params=params,
        n_subjects=50,
        seed=15,
        covariates=(
            CovariateGen("sex", "bernoulli", p=0.5),
            CovariateGen("z", "normal", mean=0.0, sd=1.0),
        ),
        mix=LerouxMix(0.5),
        between=BetweenCov(np.ones(3) * 2.0, np.zeros(3)),
        horizon=8.0,
    )
    subjects, _ = simulate_cohort(cfg)
    rng = np.random.default_rng(2)
    m = make_state(
        shapes=(0.85, 1.1, 0.75),
        intercepts=(-0.9, -0.4, -0.3),
        coefficients=[[0.25, -0.15], [0.05, 0.1], [-0.2, 0.12]],
        effects=0.3 * rng.normal(size=(4, 3)),
        n_regions=4,
    )
    grad = cohort_loglik_grad(subjects, m)
    step = 1e-5

    def fd(build):
        return (cohort_loglik(subjects, build(step)) - cohort_loglik(subjects, build(-step))) / (
            2 * step
        )

    for j in range(3):
        def bump_b0(h, j=j):
            params = list(m.params)
            p = params[j]
            params[j] = TransitionParams(p.shape, p.intercept + h, p.coefficients)
            return make_state(
                shapes=[q.shape for q in params],
                intercepts=[q.intercept for q in params],
                coefficients=[q.coefficients for q in params],
                effects=m.effects.values,
                n_regions=4,
            )

        assert fd(bump_b0) == pytest.approx(grad["beta0"][j], rel=1e-4)

        for l in range(2):
            def bump_beta(h, j=j, l=l):
                coefs = [q.coefficients.copy() for q in m.params]
                coefs[j][l] += h
                return make_state(
                    shapes=[q.shape for q in m.params],
                    intercepts=[q.intercept for q in m.params],
                    coefficients=coefs,
                    effects=m.effects.values,
                    n_regions=4,
                )

            assert fd(bump_beta) == pytest.approx(grad["beta"][j][l], rel=1e-4)

        def bump_shape(h, j=j):
            shapes = [q.shape for q in m.params]
            shapes[j] += h
            return make_state(
                shapes=shapes,
                intercepts=[q.intercept for q in m.params],
                coefficients=[q.coefficients for q in m.params],
                effects=m.effects.values,
                n_regions=4,
            )

        assert fd(bump_shape) == pytest.approx(grad["shape"][j], rel=1e-4)

    for k in range(4):
        for j in range(3):
            def bump_b(h, k=k, j=j):
                eff = m.effects.values.copy()
                eff[k, j] += h
                return make_state(
                    shapes=[q.shape for q in m.params],
                    intercepts=[q.intercept for q in m.params],
                    coefficients=[q.coefficients for q in m.params],
                    effects=eff,
                    n_regions=4,
                )

            got = grad["b"][k, j]
            want = fd(bump_b)
            assert got == pytest.approx(want, rel=1e-4, abs=1e-8)


def test_subject_validation_errors():
    with pytest.raises(DataError):
        Subject(region=0, covariates=[], t1=0.0, e1=0)
    with pytest.raises(DataError):
        Subject(region=0, covariates=[], t1=1.0, e1=1)  # missing t2/e2
    with pytest.raises(DataError):
        Subject(region=0, covariates=[], t1=1.0, e1=0, t2=1.0, e2=0)
    with pytest.raises(DataError):
        Subject(region=0, covariates=[], t1=1.0, e1=1, t2=-1.0, e2=0)
    with pytest.raises(DataError):
        Subject(region=0, covariates=[], t1=1.0, e1=3)


def test_arity_and_region_checks():
    m = make_state(coefficients=[[0.1], [0.1], [0.1]])
    with pytest.raises(DataError):
        subject_loglik(Subject(region=0, covariates=[1.0, 2.0], t1=1.0, e1=0), m)
    with pytest.raises(DataError):
        subject_loglik(Subject(region=9, covariates=[1.0], t1=1.0, e1=0), m)
    with pytest.raises(DataError):
        cohort_loglik([Subject(region=0, covariates=[1.0, 2.0], t1=1.0, e1=0)], m)
    mixed = [
        Subject(region=0, covariates=[1.0], t1=1.0, e1=0),
        Subject(region=0, covariates=[1.0, 2.0], t1=1.0, e1=0),
    ]
    with pytest.raises(DataError):
        CohortData.from_subjects(mixed)
