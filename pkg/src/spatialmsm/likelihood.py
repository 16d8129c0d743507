"""Illness-death log-likelihood for right-censored cohorts.

States: 1 = initial, 2 = illness (transient), 3 = death (absorbing). The
process is semi-Markov: the 2->3 intensity runs on the clock started at entry
into state 2, so ``t2`` is always duration since that entry, never calendar
time. Event codes follow the cohort CSV: e1 in {0 censored, 1 illness,
2 death}; e2 in {0 censored, 1 death}.

A subject contributes, with Lambda the cumulative intensities at its linear
predictors:

    censored in state 1 at t1:   -L12(t1) - L13(t1)
    death at t1:                 log h13(t1) - L12(t1) - L13(t1)
    illness at t1, censored t2:  log h12(t1) - L12(t1) - L13(t1) - L23(t2)
    illness at t1, death at t2:  log h12(t1) - L12(t1) - L13(t1)
                                 + log h23(t2) - L23(t2)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError
from .gmrf import N_TRANSITIONS, BetweenCov, LerouxMix, RandomEffects
from .hazard import TransitionParams, cum_hazard, hazard

EVENT_CENSORED = 0
EVENT_ILLNESS = 1
EVENT_DEATH = 2


@dataclass(frozen=True, eq=False)
class Subject:
    """One individual's covariates, region, and observed path."""

    region: int
    covariates: np.ndarray
    t1: float
    e1: int
    t2: float | None = None
    e2: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "covariates", np.asarray(self.covariates, dtype=float).ravel()
        )
        if self.t1 <= 0:
            raise DataError(f"t1 must be positive, got {self.t1}")
        if self.e1 not in (EVENT_CENSORED, EVENT_ILLNESS, EVENT_DEATH):
            raise DataError(f"e1 must be 0, 1 or 2, got {self.e1}")
        has_second = self.t2 is not None or self.e2 is not None
        if self.e1 == EVENT_ILLNESS:
            if self.t2 is None or self.e2 is None:
                raise DataError("illness exit requires both t2 and e2")
            if self.t2 <= 0:
                raise DataError(f"t2 must be positive, got {self.t2}")
            if self.e2 not in (0, 1):
                raise DataError(f"e2 must be 0 or 1, got {self.e2}")
        elif has_second:
            raise DataError("t2/e2 are only allowed when e1 is the illness event")


@dataclass(frozen=True, eq=False)
class ModelState:
    """Full parameter state: three transitions, effects, hyperparameters."""

    params: tuple[TransitionParams, TransitionParams, TransitionParams]
    effects: RandomEffects
    mix: LerouxMix
    between: BetweenCov

    def __post_init__(self):
        if len(self.params) != N_TRANSITIONS:
            raise DataError("ModelState needs exactly three TransitionParams")

    @property
    def n_covariates(self) -> int:
        return self.params[0].n_covariates

    @property
    def n_regions(self) -> int:
        return self.effects.n_regions


@dataclass(eq=False)
class CohortData:
    """Packed array view of a cohort for vectorised likelihood work.

    State-1 exposure is every subject; state-2 exposure is the subset with
    e1 = illness, indexed by ``ill``.
    """

    x: np.ndarray          # (N, L)
    region: np.ndarray     # (N,) int, 0-indexed
    t1: np.ndarray         # (N,)
    e1: np.ndarray         # (N,) int
    t2: np.ndarray         # (n_ill,)
    e2: np.ndarray         # (n_ill,) int
    ill: np.ndarray = field(init=False)      # indices with e1 == illness
    log_t1: np.ndarray = field(init=False)
    log_t2: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ill = np.flatnonzero(self.e1 == EVENT_ILLNESS)
        if self.ill.size != self.t2.size:
            raise DataError("t2/e2 length must equal the number of illness exits")
        self.log_t1 = np.log(self.t1)
        self.log_t2 = np.log(self.t2) if self.t2.size else self.t2.copy()

    @property
    def n(self) -> int:
        return self.t1.size

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_subjects(cls, subjects: list[Subject]) -> "CohortData":
        if not subjects:
            return cls(
                x=np.zeros((0, 0)),
                region=np.zeros(0, dtype=np.int64),
                t1=np.zeros(0),
                e1=np.zeros(0, dtype=np.int64),
                t2=np.zeros(0),
                e2=np.zeros(0, dtype=np.int64),
            )
        arity = subjects[0].covariates.size
        for i, s in enumerate(subjects):
            if s.covariates.size != arity:
                raise DataError(f"subject {i}: covariate arity {s.covariates.size} != {arity}")
        ill = [s for s in subjects if s.e1 == EVENT_ILLNESS]
        return cls(
            x=np.array([s.covariates for s in subjects], dtype=float),
            region=np.array([s.region for s in subjects], dtype=np.int64),
            t1=np.array([s.t1 for s in subjects], dtype=float),
            e1=np.array([s.e1 for s in subjects], dtype=np.int64),
            t2=np.array([s.t2 for s in ill], dtype=float),
            e2=np.array([s.e2 for s in ill], dtype=np.int64),
        )

    def exposure(self, j: int):
        """(times, log_times, events, x, region) for transition index j."""
        if j == 0:
            return self.t1, self.log_t1, self.e1 == EVENT_ILLNESS, self.x, self.region
        if j == 1:
            return self.t1, self.log_t1, self.e1 == EVENT_DEATH, self.x, self.region
        return self.t2, self.log_t2, self.e2 == 1, self.x[self.ill], self.region[self.ill]


def _as_cohort(data) -> CohortData:
    return data if isinstance(data, CohortData) else CohortData.from_subjects(list(data))


def subject_loglik(s: Subject, m: ModelState) -> float:
    """Log-likelihood contribution of a single subject."""
    if s.covariates.size != m.n_covariates:
        raise DataError(
            f"covariate arity mismatch: subject has {s.covariates.size}, "
            f"model has {m.n_covariates}"
        )
    if not (0 <= s.region < m.n_regions):
        raise DataError(f"region {s.region} outside the model's {m.n_regions} regions")
    b = m.effects.values[s.region]
    eta = [float(s.covariates @ p.coefficients) + b[j] for j, p in enumerate(m.params)]
    out = -cum_hazard(m.params[0], eta[0], s.t1) - cum_hazard(m.params[1], eta[1], s.t1)
    if s.e1 == EVENT_DEATH:
        out += float(np.log(hazard(m.params[1], eta[1], s.t1)))
    elif s.e1 == EVENT_ILLNESS:
        out += float(np.log(hazard(m.params[0], eta[0], s.t1)))
        out -= cum_hazard(m.params[2], eta[2], s.t2)
        if s.e2 == 1:
            out += float(np.log(hazard(m.params[2], eta[2], s.t2)))
    return float(out)


def cohort_loglik(data, m: ModelState) -> float:
    """Sum of subject contributions, vectorised; order-independent."""
    cohort = _as_cohort(data)
    if cohort.n == 0:
        return 0.0
    if cohort.n_covariates != m.n_covariates:
        raise DataError(
            f"covariate arity mismatch: cohort has {cohort.n_covariates}, "
            f"model has {m.n_covariates}"
        )
    total = 0.0
    for j, p in enumerate(m.params):
        t, log_t, events, x, region = cohort.exposure(j)
        if t.size == 0:
            continue
        eta = x @ p.coefficients + m.effects.values[region, j]
        log_lam = p.intercept + eta
        cum = np.exp(log_lam + p.shape * log_t)
        total += float(
            np.sum(events * (np.log(p.shape) + log_lam + (p.shape - 1.0) * log_t)) - np.sum(cum)
        )
    return total


def cohort_loglik_grad(data, m: ModelState) -> dict[str, np.ndarray]:
    """Analytic gradient of ``cohort_loglik``.

    Returns arrays keyed 'beta0' (3,), 'beta' (3, L), 'shape' (3,) and
    'b' (K, 3). The score for any log-linear coordinate c with dh/dc = h and
    dLambda/dc = Lambda is sum(event - Lambda), weighted by the coordinate's
    design column.
    """
    cohort = _as_cohort(data)
    L = m.n_covariates
    K = m.n_regions
    grad = {
        "beta0": np.zeros(N_TRANSITIONS),
        "beta": np.zeros((N_TRANSITIONS, L)),
        "shape": np.zeros(N_TRANSITIONS),
        "b": np.zeros((K, N_TRANSITIONS)),
    }
    if cohort.n == 0:
        return grad
    for j, p in enumerate(m.params):
        t, log_t, events, x, region = cohort.exposure(j)
        if t.size == 0:
            continue
        eta = x @ p.coefficients + m.effects.values[region, j]
        cum = np.exp(p.intercept + eta + p.shape * log_t)
        resid = events - cum
        grad["beta0"][j] = float(resid.sum())
        grad["beta"][j] = x.T @ resid
        grad["shape"][j] = float(
            np.sum(events * (1.0 / p.shape + log_t)) - np.sum(cum * log_t)
        )
        np.add.at(grad["b"][:, j], region, resid)
    return grad
