"""Weibull proportional-hazards transition intensities.

Each transition has a Weibull baseline ``h0(t) = shape * scale * t**(shape-1)``
multiplied by ``exp(eta)``, where the linear predictor ``eta = x'beta + b`` is
the covariate term plus the region effect. The scale is stored only as the
intercept ``beta0 = log(scale)`` so all inference runs unconstrained.

Times are in years. The linear predictor is a plain float (or array); there is
no wrapper type.

All three operations accept scalar or array ``t``/``u`` and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, NumericalError


@dataclass(frozen=True, eq=False)
class TransitionParams:
    """Weibull shape, log-scale intercept, and regression coefficients.

    ``shape > 0`` is required by every operation; it is checked there (and by
    the prior support test) rather than at construction so that out-of-support
    states can be represented and scored as -inf.
    """

    shape: float
    intercept: float
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float).ravel()
        )

    @property
    def n_covariates(self) -> int:
        return self.coefficients.size


def linear_predictor(p: TransitionParams, x: np.ndarray, b: float = 0.0):
    """eta = x'beta + b (the intercept is NOT part of eta)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.n_covariates:
        raise DataError(
            f"covariate arity mismatch: got {x.shape[-1]}, expected {p.n_covariates}"
        )
    return x @ p.coefficients + b


def _check_shape(p: TransitionParams):
    if not (p.shape > 0):
        raise DataError(f"Weibull shape must be positive, got {p.shape}")


def hazard(p: TransitionParams, eta, t):
    """Transition intensity h(t) = shape * scale * t**(shape-1) * exp(eta).

    Requires ``t > 0``: for shape < 1 the baseline diverges at zero, so zero
    times are a data error rather than an evaluable point.
    """
    _check_shape(p)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DataError("hazard requires t > 0")
    out = p.shape * np.exp(p.intercept + np.asarray(eta) + (p.shape - 1.0) * np.log(t))
    if not np.all(np.isfinite(out)):
        raise NumericalError("hazard overflowed to a nonfinite value")
    return out if out.ndim else float(out)


def cum_hazard(p: TransitionParams, eta, t):
    """Cumulative intensity Lambda(t) = scale * t**shape * exp(eta), Lambda(0) = 0."""
    _check_shape(p)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DataError("cum_hazard requires t >= 0")
    out = np.exp(p.intercept + np.asarray(eta)) * t**p.shape
    return out if out.ndim else float(out)


def inv_cum_hazard(p: TransitionParams, eta, u):
    """Inverse of ``cum_hazard`` in t: the time at which Lambda(t) = u.

    Used for inverse-transform simulation of transition times.
    """
    _check_shape(p)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DataError("inv_cum_hazard requires u >= 0")
    out = (u * np.exp(-p.intercept - np.asarray(eta))) ** (1.0 / p.shape)
    return out if out.ndim else float(out)
