"""Posterior outcome measures: sojourn survival, transition/occupation
probabilities, and cumulative incidence functions.

Measures are evaluated from per-transition pairs (a, c) where the cumulative
intensity is ``Lambda(t) = exp(c) * t**a``: ``a`` is the Weibull shape and
``c`` collects the intercept, covariate term and region effect. The pairs may
be scalars (one state) or arrays over posterior draws and regions; the
quadrature then integrates every draw/region at once.

Closed forms:
    S1(t)            = exp(-L12(t) - L13(t))
    p11(s,t)         = exp(-[L12(t)-L12(s)] - [L13(t)-L13(s)])
    p22(s,t | t12)   = exp(-[L23(t-t12) - L23(s-t12)])      (clock reset)
    p23(s,t | t12)   = 1 - p22(s,t | t12)
    p13(s,t)         = 1 - p11(s,t) - p12(s,t)
Quadrature:
    p12(s,t)  = int_s^t p11(s,u) h12(u) p22(u,t | u) du
    F1j(t)    = int_0^t h1j(u) S1(u) du,   j in {12, 13}

Integrals starting at zero absorb the Weibull endpoint singularity exactly by
substituting u = t * w**(1/a), which turns ``h1j(u) du`` into a constant times
``dw`` on the unit interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import DataError, NumericalError
from .likelihood import ModelState
from .quadrature import adaptive_gauss_legendre

MEASURES = ("S1", "p11", "p12", "p13", "p22", "p23", "F12", "F13")
_R_CONDITIONED = ("p22", "p23")

_UNIT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Profile:
    """A covariate vector (on the model's centered scale) and a region.

    ``region`` may be None for uses that sweep all regions, such as
    ``posterior_summary``; the single-state operations require it.
    """

    covariates: np.ndarray
    region: int | None = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(
            self, "covariates", np.asarray(self.covariates, dtype=float).ravel()
        )


@dataclass(frozen=True, eq=False)
class OutcomeGrid:
    """A measure with its evaluation times and conditioning information."""

    measure: str
    times: np.ndarray
    s: float = 0.0
    t12: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float).ravel())
        if self.measure not in MEASURES:
            raise DataError(f"unknown measure {self.measure!r}; choose from {MEASURES}")
        if self.times.size == 0:
            raise DataError("times grid is empty")
        if np.any(self.times < 0) or np.any(np.diff(self.times) <= 0):
            raise DataError("times must be nonnegative and strictly increasing")
        if self.s < 0 or self.s > self.times[0]:
            raise DataError("conditioning time s must satisfy 0 <= s <= min(times)")
        if self.measure in _R_CONDITIONED:
            if self.t12 is None:
                raise DataError(f"measure {self.measure} requires the illness time t12")
            if not (0 <= self.t12 <= self.s):
                raise DataError("t12 must satisfy 0 <= t12 <= s")
        elif self.t12 is not None:
            raise DataError(f"measure {self.measure} does not take a t12 condition")


def _cum(a, c, t):
    """exp(c) * t**a, broadcasting over draw/region axes."""
    return np.exp(c) * np.power(t, a)


def _clamp_unit(values, what: str):
    v = np.asarray(values, dtype=float)
    low, high = float(v.min(initial=0.0)), float(v.max(initial=1.0))
    if low < -_UNIT_TOL or high > 1.0 + _UNIT_TOL:
        raise NumericalError(
            f"{what} left [0, 1] by more than {_UNIT_TOL}: range [{low}, {high}]"
        )
    return np.clip(v, 0.0, 1.0)


def _surv1(a, c, t):
    return np.exp(-_cum(a[0], c[0], t) - _cum(a[1], c[1], t))


def _p11(a, c, s, t):
    return np.exp(
        -(_cum(a[0], c[0], t) - _cum(a[0], c[0], s))
        - (_cum(a[1], c[1], t) - _cum(a[1], c[1], s))
    )


def _p22(a, c, s, t, t12):
    return np.exp(-(_cum(a[2], c[2], t - t12) - _cum(a[2], c[2], s - t12)))


def _broadcast_nodes(nodes, param_ndim):
    return nodes.reshape((nodes.size,) + (1,) * param_ndim)


def _out_shape(a, c):
    return np.broadcast_shapes(np.shape(a[0]), *(np.shape(cj) for cj in c))


def _p12(a, c, s, t, tol=1e-8):
    if t == s:
        return np.zeros(_out_shape(a, c))
    if s == 0.0:
        # u = t * w**(1/a12) maps h12(u) du to exp(c12) t**a12 dw on [0, 1].
        def integrand(w):
            wb = _broadcast_nodes(np.asarray(w), np.ndim(a[0]))
            u = t * np.power(wb, 1.0 / a[0])
            return _surv1(a, c, u) * np.exp(-_cum(a[2], c[2], t - u))

        base = adaptive_gauss_legendre(integrand, 0.0, 1.0, tol=tol)
        return _cum(a[0], c[0], t) * base

    def integrand(u):
        ub = _broadcast_nodes(np.asarray(u), np.ndim(a[0]))
        h12 = a[0] * np.exp(c[0]) * np.power(ub, a[0] - 1.0)
        return _p11(a, c, s, ub) * h12 * np.exp(-_cum(a[2], c[2], t - ub))

    return adaptive_gauss_legendre(integrand, s, t, tol=tol)


def _cif(a, c, j, t, tol=1e-8):
    """F_1j(t) for j in {0: illness, 1: direct death}, zero-start integral."""
    if t == 0.0:
        return np.zeros(_out_shape(a, c))

    def integrand(w):
        wb = _broadcast_nodes(np.asarray(w), np.ndim(a[j]))
        u = t * np.power(wb, 1.0 / a[j])
        return _surv1(a, c, u)

    base = adaptive_gauss_legendre(integrand, 0.0, 1.0, tol=tol)
    return _cum(a[j], c[j], t) * base


def _evaluate(measure, a, c, s, t, t12, tol=1e-8):
    if measure == "S1":
        return _surv1(a, c, t)
    if measure == "p11":
        return _p11(a, c, s, t)
    if measure == "p12":
        return _p12(a, c, s, t, tol)
    if measure == "p13":
        return 1.0 - _p11(a, c, s, t) - _p12(a, c, s, t, tol)
    if measure == "p22":
        return _p22(a, c, s, t, t12)
    if measure == "p23":
        return 1.0 - _p22(a, c, s, t, t12)
    if measure == "F12":
        return _cif(a, c, 0, t, tol)
    if measure == "F13":
        return _cif(a, c, 1, t, tol)
    raise DataError(f"unknown measure {measure!r}")


def _state_arrays(m: ModelState, p: Profile):
    if p.region is None:
        raise DataError("this operation needs a profile with a region")
    if not (0 <= p.region < m.n_regions):
        raise DataError(f"region {p.region} outside the model's {m.n_regions} regions")
    if p.covariates.size != m.n_covariates:
        raise DataError(
            f"covariate arity mismatch: profile has {p.covariates.size}, "
            f"model has {m.n_covariates}"
        )
    a = np.array([tp.shape for tp in m.params])
    c = np.array(
        [
            tp.intercept + float(p.covariates @ tp.coefficients) + m.effects.values[p.region, j]
            for j, tp in enumerate(m.params)
        ]
    )
    return a, c


def sojourn_survival(m: ModelState, p: Profile, t: float) -> float:
    """P(still in the initial state at t); equals exp of the censored-in-state-1
    likelihood contribution."""
    if t < 0:
        raise DataError("t must be nonnegative")
    a, c = _state_arrays(m, p)
    return float(_clamp_unit(_surv1(a, c, t), "S1"))


def transition_probability(
    m: ModelState, p: Profile, measure: str, s: float, t: float, t12: float | None = None
) -> float:
    """One transition or occupation probability (occupation: s = 0)."""
    if t < s:
        raise DataError("t must be at least s")
    if measure in ("S1", "F12", "F13"):
        raise DataError(f"{measure} is not a transition probability")
    grid = OutcomeGrid(measure=measure, times=np.array([t]), s=s, t12=t12)
    a, c = _state_arrays(m, p)
    return float(_clamp_unit(_evaluate(measure, a, c, s, t, grid.t12), measure))


def cumulative_incidence(m: ModelState, p: Profile, transition: str, t: float) -> float:
    """F_1j(t): probability of having made first transition j by time t."""
    if transition not in ("12", "13"):
        raise DataError("cumulative incidence is defined for transitions '12' and '13'")
    if t < 0:
        raise DataError("t must be nonnegative")
    a, c = _state_arrays(m, p)
    j = 0 if transition == "12" else 1
    return float(_clamp_unit(_cif(a, c, j, t), f"F1{transition[1]}"))


def _thin_indices(n: int, max_draws: int | None) -> np.ndarray:
    if max_draws is None or n <= max_draws:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, max_draws).round().astype(int))


def _sd(values, axis=0):
    n = values.shape[axis]
    return np.std(values, axis=axis, ddof=1) if n > 1 else np.zeros(values.shape[1:])


def posterior_summary(
    draws,
    p: Profile,
    g: OutcomeGrid,
    max_draws: int | None = None,
    quad_tol: float = 1e-8,
) -> pd.DataFrame:
    """Pointwise posterior mean/sd/2.5%/97.5% of a measure per (region, time).

    ``draws`` is a PosteriorDraws object; all chains are pooled. If the
    profile names a region only that region is reported, otherwise every
    region in the fitted model. ``max_draws`` thins the pooled draws evenly
    and deterministically.
    """
    alpha = draws.alpha.reshape(-1, 3)
    beta0 = draws.beta0.reshape(-1, 3)
    beta = draws.beta.reshape(-1, 3, draws.beta.shape[-1])
    b = draws.b.reshape(-1, *draws.b.shape[-2:])
    if alpha.shape[0] == 0:
        raise DataError("no posterior draws to summarise")
    if p.covariates.size != beta.shape[-1]:
        raise DataError(
            f"covariate arity mismatch: profile has {p.covariates.size}, "
            f"draws have {beta.shape[-1]}"
        )
    keep = _thin_indices(alpha.shape[0], max_draws)
    regions = np.array([p.region]) if p.region is not None else np.arange(b.shape[1])
    # Per transition: shape (draws, 1) and linear predictor (draws, regions).
    a = [alpha[keep, j][:, None] for j in range(3)]
    c = [
        (beta0[keep, j] + beta[keep, j] @ p.covariates)[:, None] + b[np.ix_(keep, regions)][..., j]
        for j in range(3)
    ]
    rows = []
    for t in g.times:
        vals = _clamp_unit(_evaluate(g.measure, a, c, g.s, float(t), g.t12, quad_tol), g.measure)
        rows.append(
            pd.DataFrame(
                {
                    "region": regions + 1,
                    "profile": p.label,
                    "time": float(t),
                    "measure": g.measure,
                    "mean": vals.mean(axis=0),
                    "sd": _sd(vals),
                    "q025": np.quantile(vals, 0.025, axis=0),
                    "q975": np.quantile(vals, 0.975, axis=0),
                }
            )
        )
    out = pd.concat(rows, ignore_index=True)
    return out.sort_values(["region", "time"], kind="stable").reset_index(drop=True)
