import math

import numpy as np
import pytest

from conftest import make_state, markov_p12
from spatialmsm.exceptions import DataError, NumericalError
from spatialmsm.outcomes import (
    OutcomeGrid,
    Profile,
    _clamp_unit,
    cumulative_incidence,
    posterior_summary,
    sojourn_survival,
    transition_probability,
)

PROF = Profile(covariates=[], region=0)


def test_sojourn_survival_values():
    m = make_state()
    assert sojourn_survival(m, PROF, 0.0) == 1.0
    assert sojourn_survival(m, PROF, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-12)


def test_degenerate_intervals():
    m = make_state()
    assert transition_probability(m, PROF, "p11", 1.0, 1.0) == 1.0
    assert transition_probability(m, PROF, "p23", 1.0, 1.0, t12=0.5) == 0.0
    assert transition_probability(m, PROF, "p12", 1.0, 1.0) == 0.0
    assert cumulative_incidence(m, PROF, "12", 0.0) == 0.0
    assert cumulative_incidence(m, PROF, "13", 0.0) == 0.0


def test_markov_occupation_probability():
    m = make_state(intercepts=(math.log(0.5), math.log(0.5), 0.0))
    got = transition_probability(m, PROF, "p12", 0.0, 1.0)
    assert got == pytest.approx(0.5 * math.exp(-1.0), abs=1e-8)
    assert got == pytest.approx(0.18394, abs=5e-6)


@pytest.mark.parametrize("seed", range(5))
def test_markov_cases_match_closed_form(seed):
    rng = np.random.default_rng(seed)
    a, b, c = np.exp(rng.uniform(-2, 0.5, size=3))
    m = make_state(intercepts=(math.log(a), math.log(b), math.log(c)))
    for t in (0.5, 1.0, 2.0, 4.0):
        got = transition_probability(m, PROF, "p12", 0.0, t)
        assert got == pytest.approx(markov_p12(a, b, c, t), abs=1e-8)


def test_row_stochastic_identities_on_grid():
    rng = np.random.default_rng(77)
    m = make_state(
        shapes=rng.uniform(0.5, 2.0, size=3),
        intercepts=rng.uniform(-3, 1, size=3),
        effects=0.3 * rng.normal(size=(3, 3)),
    )
    for t in np.linspace(0.05, 5.0, 50):
        p11 = transition_probability(m, PROF, "p11", 0.0, float(t))
        p12 = transition_probability(m, PROF, "p12", 0.0, float(t))
        p13 = transition_probability(m, PROF, "p13", 0.0, float(t))
        assert abs(p11 + p12 + p13 - 1.0) < 1e-8
        p22 = transition_probability(m, PROF, "p22", 0.2, float(t) + 0.2, t12=0.1)
        p23 = transition_probability(m, PROF, "p23", 0.2, float(t) + 0.2, t12=0.1)
        assert abs(p22 + p23 - 1.0) < 1e-8


def test_cif_closed_forms_and_identity():
    m = make_state()
    f12 = cumulative_incidence(m, PROF, "12", 1.0)
    assert f12 == pytest.approx(0.5 * (1 - math.exp(-2.0)), abs=1e-9)
    assert f12 == pytest.approx(0.43233, abs=5e-6)
    # symmetric competing risks: split tends to one half
    assert cumulative_incidence(m, PROF, "12", 40.0) == pytest.approx(0.5, abs=1e-8)
    rng = np.random.default_rng(3)
    m2 = make_state(shapes=rng.uniform(0.5, 2, 3), intercepts=rng.uniform(-2, 0.5, 3))
    for t in (0.5, 1.0, 3.0):
        s1 = sojourn_survival(m2, PROF, t)
        f12 = cumulative_incidence(m2, PROF, "12", t)
        f13 = cumulative_incidence(m2, PROF, "13", t)
        assert abs(f12 + f13 + s1 - 1.0) < 1e-8


def test_monotonicity_on_grid():
    m = make_state(shapes=(0.7, 1.4, 0.9), intercepts=(-0.5, -1.0, -0.2))
    grid = np.linspace(0.0, 6.0, 25)
    s1 = [sojourn_survival(m, PROF, float(t)) for t in grid]
    f12 = [cumulative_incidence(m, PROF, "12", float(t)) for t in grid]
    f13 = [cumulative_incidence(m, PROF, "13", float(t)) for t in grid]
    assert np.all(np.diff(s1) <= 0)
    assert np.all(np.diff(f12) >= 0)
    assert np.all(np.diff(f13) >= 0)
    p11 = [transition_probability(m, PROF, "p11", 0.0, float(t)) for t in grid]
    assert np.all(np.diff(p11) <= 0)


def test_semi_markov_shift_invariance():
    # p22 depends on (s - t12, t - t12) only
    m = make_state(shapes=(1.0, 1.0, 0.7), intercepts=(0.0, 0.0, -0.4))
    base = transition_probability(m, PROF, "p22", 1.0, 3.0, t12=0.5)
    for shift in (0.5, 1.7, 4.0):
        moved = transition_probability(m, PROF, "p22", 1.0 + shift, 3.0 + shift, t12=0.5 + shift)
        assert moved == pytest.approx(base, rel=1e-12)


def test_clamp_tolerance():
    assert _clamp_unit(1.0 + 5e-9, "x") == 1.0
    assert _clamp_unit(-5e-9, "x") == 0.0
    with pytest.raises(NumericalError):
        _clamp_unit(1.1, "x")
    with pytest.raises(NumericalError):
        _clamp_unit(-1e-6, "x")


def test_grid_validation():
    with pytest.raises(DataError):
        OutcomeGrid(measure="p99", times=np.array([1.0]))
    with pytest.raises(DataError):
        OutcomeGrid(measure="p11", times=np.array([2.0, 1.0]))
    with pytest.raises(DataError):
        OutcomeGrid(measure="p11", times=np.array([1.0]), s=2.0)
    with pytest.raises(DataError, match="t12"):
        OutcomeGrid(measure="p22", times=np.array([1.0]), s=0.5)
    with pytest.raises(DataError):
        OutcomeGrid(measure="p22", times=np.array([1.0]), s=0.5, t12=0.7)
    with pytest.raises(DataError):
        OutcomeGrid(measure="p11", times=np.array([1.0]), s=0.5, t12=0.1)


def test_profile_and_measure_errors():
    m = make_state()
    with pytest.raises(DataError):
        sojourn_survival(m, Profile(covariates=[], region=None), 1.0)
    with pytest.raises(DataError):
        sojourn_survival(m, Profile(covariates=[1.0], region=0), 1.0)
    with pytest.raises(DataError):
        transition_probability(m, PROF, "S1", 0.0, 1.0)
    with pytest.raises(DataError):
        transition_probability(m, PROF, "p11", 1.0, 0.5)
    with pytest.raises(DataError):
        cumulative_incidence(m, PROF, "23", 1.0)


def _tiny_draws(n_draws=4, K=3, jitter=0.0, seed=0):
    from spatialmsm.mcmc import PosteriorDraws

    rng = np.random.default_rng(seed)
    base_alpha = np.array([1.0, 1.0, 1.0])
    base_beta0 = np.array([math.log(0.5), math.log(0.5), 0.0])
    alpha = np.tile(base_alpha, (1, n_draws, 1)) + jitter * rng.normal(size=(1, n_draws, 3)) * 0.1
    beta0 = np.tile(base_beta0, (1, n_draws, 1)) + jitter * rng.normal(size=(1, n_draws, 3)) * 0.1
    return PosteriorDraws(
        alpha=alpha,
        beta0=beta0,
        beta=np.zeros((1, n_draws, 3, 0)),
        b=np.zeros((1, n_draws, K, 3)),
        gamma=np.full((1, n_draws), 0.5),
        tau=np.ones((1, n_draws, 3)),
        rho=np.zeros((1, n_draws, 3)),
        log_post=np.zeros((1, n_draws)),
        iterations=np.arange(1, n_draws + 1),
        covariate_names=(),
    )


def test_posterior_summary_single_draw():
    draws = _tiny_draws(n_draws=1)
    grid = OutcomeGrid(measure="p12", times=np.array([1.0, 2.0]))
    table = posterior_summary(draws, Profile(covariates=[], region=None), grid)
    assert len(table) == 2 * 3  # times x regions
    m = make_state(intercepts=(math.log(0.5), math.log(0.5), 0.0))
    want = transition_probability(m, PROF, "p12", 0.0, 1.0)
    got = table[(table.region == 1) & (table.time == 1.0)]
    assert got["mean"].iloc[0] == pytest.approx(want, abs=1e-8)
    assert got["sd"].iloc[0] == 0.0


def test_posterior_summary_degenerate_draws_zero_width():
    draws = _tiny_draws(n_draws=6, jitter=0.0)
    grid = OutcomeGrid(measure="S1", times=np.array([1.0]))
    table = posterior_summary(draws, Profile(covariates=[], region=None), grid)
    assert np.allclose(table["sd"], 0.0)
    assert np.allclose(table["q025"], table["q975"])


def test_posterior_summary_matches_per_draw_closed_form():
    draws = _tiny_draws(n_draws=8, jitter=1.0, seed=4)
    grid = OutcomeGrid(measure="p12", times=np.array([1.0, 3.0]))
    table = posterior_summary(draws, Profile(covariates=[], region=0), grid)
    for row_t in (1.0, 3.0):
        vals = []
        for i in range(8):
            a = np.exp(draws.beta0[0, i])
            vals.append(markov_p12(a[0], a[1], a[2], row_t))
        want = np.mean(vals)
        got = table[table.time == row_t]["mean"].iloc[0]
        assert got == pytest.approx(want, abs=1e-7)


def test_posterior_summary_row_order_and_region_subset():
    draws = _tiny_draws(n_draws=3)
    grid = OutcomeGrid(measure="S1", times=np.array([1.0, 2.0]))
    table = posterior_summary(draws, Profile(covariates=[], region=None), grid)
    assert table.region.tolist() == [1, 1, 2, 2, 3, 3]
    assert table.time.tolist() == [1.0, 2.0] * 3
    single = posterior_summary(draws, Profile(covariates=[], region=1), grid)
    assert single.region.tolist() == [2, 2]


def test_posterior_summary_arity_mismatch():
    draws = _tiny_draws(n_draws=2)
    grid = OutcomeGrid(measure="S1", times=np.array([1.0]))
    with pytest.raises(DataError):
        posterior_summary(draws, Profile(covariates=[1.0], region=None), grid)
