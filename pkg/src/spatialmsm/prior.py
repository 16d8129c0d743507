"""Log-priors and unconstrained reparameterisations.

Independent priors: Gaussian (mean 0, small precision) on every intercept and
regression coefficient; a shape prior on each Weibull shape that shrinks
toward the exponential model (lognormal by default, an optional numeric
penalised-complexity construction); a Wishart on the between-transition
precision matrix; Uniform on the Leroux mixing weight over its clipped
domain. The Gaussian field density of the effects themselves lives in the
gmrf module, not here.

The unconstrained map sends shapes and precisions through log, the mixing
weight through a scaled logit, and the correlation part of the
between-transition covariance through a tanh lower-triangular factor that is
positive definite by construction. ``log_abs_det_jacobian`` reports the
density correction for working in unconstrained coordinates (target
parameterisation: the precision matrix for the between-transition block).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import expit, logit, multigammaln

from .exceptions import ConfigError, DataError
from .gmrf import GAMMA_MAX, N_TRANSITIONS, BetweenCov, LerouxMix, RandomEffects
from .hazard import TransitionParams
from .likelihood import ModelState

_LOG_2PI = math.log(2.0 * math.pi)

SHAPE_PRIOR_KINDS = ("lognormal", "pc-numeric")


@dataclass(frozen=True, eq=False)
class PriorConfig:
    """Hyperparameters of every prior block."""

    beta_precision: float = 0.001
    wishart_df: float = 7.0
    wishart_scale: np.ndarray = field(default_factory=lambda: np.eye(N_TRANSITIONS))
    shape_prior: str = "lognormal"
    shape_sd: float = 1.0
    pc_rate: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "wishart_scale", np.asarray(self.wishart_scale, dtype=float))
        if self.beta_precision <= 0:
            raise ConfigError("beta_precision must be positive")
        if self.wishart_df <= N_TRANSITIONS - 1:
            raise ConfigError(
                f"wishart_df must exceed {N_TRANSITIONS - 1} for a proper prior"
            )
        if self.wishart_scale.shape != (N_TRANSITIONS, N_TRANSITIONS):
            raise ConfigError("wishart_scale must be 3x3")
        if np.linalg.eigvalsh(self.wishart_scale).min() <= 0:
            raise ConfigError("wishart_scale must be positive definite")
        if self.shape_prior not in SHAPE_PRIOR_KINDS:
            raise ConfigError(f"shape_prior must be one of {SHAPE_PRIOR_KINDS}")
        if self.shape_sd <= 0 or self.pc_rate <= 0:
            raise ConfigError("shape_sd and pc_rate must be positive")


def wishart_logpdf(x: np.ndarray, df: float, scale: np.ndarray) -> float:
    """Wishart log-density of an SPD matrix, written out in full."""
    x = np.asarray(x, dtype=float)
    scale = np.asarray(scale, dtype=float)
    p = x.shape[0]
    sign_x, logdet_x = np.linalg.slogdet(x)
    sign_s, logdet_s = np.linalg.slogdet(scale)
    if sign_x <= 0 or sign_s <= 0:
        return -np.inf
    trace_term = float(np.trace(np.linalg.solve(scale, x)))
    return (
        0.5 * (df - p - 1) * logdet_x
        - 0.5 * trace_term
        - 0.5 * df * p * math.log(2.0)
        - 0.5 * df * logdet_s
        - multigammaln(0.5 * df, p)
    )


def _gaussian_logpdf(value: float, precision: float) -> float:
    return 0.5 * (math.log(precision) - _LOG_2PI) - 0.5 * precision * value * value


def _weibull_exponential_divergence(shape: float) -> float:
    """KL divergence of a unit-scale Weibull from the unit exponential.

    Computed by quadrature after substituting the Weibull's own exponential
    pivot, which removes the endpoint singularity for shapes below one.
    """

    def integrand(s):
        return np.exp(-s) * (
            math.log(shape) + (shape - 1.0) / shape * np.log(s) - s + s ** (1.0 / shape)
        )

    value, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return max(value, 0.0)


@functools.lru_cache(maxsize=8)
def _pc_shape_grid(rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Cached (shape grid, log-density) for the numeric PC shape prior.

    The distance has a V-shaped minimum at the base model, so its slope is
    differenced per branch; a central difference across shape = 1 would
    cancel to zero and notch the density.
    """
    grid = np.geomspace(0.05, 20.0, 801)
    kld = np.array([_weibull_exponential_divergence(a) for a in grid])
    dist = np.sqrt(2.0 * kld)
    slope = np.empty_like(dist)
    left = grid < 1.0
    slope[left] = np.gradient(dist[left], grid[left])
    slope[~left] = np.gradient(dist[~left], grid[~left])
    density = rate * np.exp(-rate * dist) * np.abs(slope)
    density /= np.trapezoid(density, grid)
    with np.errstate(divide="ignore"):
        return grid, np.log(density)


def pc_shape_logpdf(shape: float, rate: float) -> float:
    """Numeric PC prior density for a Weibull shape; -inf outside the grid."""
    grid, log_density = _pc_shape_grid(rate)
    if not (grid[0] <= shape <= grid[-1]):
        return -np.inf
    return float(np.interp(shape, grid, log_density))


def _shape_logpdf(shape: float, c: PriorConfig) -> float:
    if not (shape > 0) or not np.isfinite(shape):
        return -np.inf
    if c.shape_prior == "lognormal":
        u = math.log(shape)
        return -u - 0.5 * _LOG_2PI - math.log(c.shape_sd) - 0.5 * (u / c.shape_sd) ** 2
    return pc_shape_logpdf(shape, c.pc_rate)


def state_in_support(m: ModelState) -> bool:
    """True iff the state lies in the prior's support product."""
    for p in m.params:
        if not (p.shape > 0 and np.isfinite(p.shape)):
            return False
        if not np.isfinite(p.intercept) or not np.all(np.isfinite(p.coefficients)):
            return False
    if not (0.0 <= m.mix.gamma <= GAMMA_MAX):
        return False
    return m.between.is_positive_definite


def log_prior(m: ModelState, c: PriorConfig) -> float:
    """Sum of the independent component log-priors; -inf outside support.

    The effects matrix B is scored by the gmrf module's field density, which
    is deliberately not included here.
    """
    if not state_in_support(m):
        return -np.inf
    out = 0.0
    for p in m.params:
        out += _gaussian_logpdf(p.intercept, c.beta_precision)
        for coef in p.coefficients:
            out += _gaussian_logpdf(float(coef), c.beta_precision)
        out += _shape_logpdf(p.shape, c)
    out += wishart_logpdf(m.between.precision(), c.wishart_df, c.wishart_scale)
    # Uniform mixing weight: flat on the clipped domain.
    return float(out)


# ---------------------------------------------------------------------------
# Unconstrained reparameterisation
# ---------------------------------------------------------------------------


def corr_from_z(z: np.ndarray) -> np.ndarray:
    """Map three unconstrained reals to a valid 3x3 correlation matrix."""
    x = np.tanh(np.asarray(z, dtype=float))
    w1 = math.sqrt(1.0 - x[0] ** 2)
    w2 = math.sqrt(1.0 - x[1] ** 2)
    c = np.eye(3)
    c[0, 1] = c[1, 0] = x[0]
    c[0, 2] = c[2, 0] = x[1]
    c[1, 2] = c[2, 1] = x[0] * x[1] + x[2] * w1 * w2
    return c


def z_from_corr(c: np.ndarray) -> np.ndarray:
    """Inverse of ``corr_from_z``; requires a positive-definite input."""
    c = np.asarray(c, dtype=float)
    x1, x2 = c[0, 1], c[0, 2]
    denom = math.sqrt((1.0 - x1**2) * (1.0 - x2**2))
    x3 = (c[1, 2] - x1 * x2) / denom
    if max(abs(x1), abs(x2), abs(x3)) >= 1.0:
        raise DataError("correlation matrix is not positive definite")
    return np.arctanh(np.array([x1, x2, x3]))


@dataclass(frozen=True)
class UnconstrainedLayout:
    """Index bookkeeping for the flat unconstrained vector.

    Order: per transition (intercept, coefficients, log shape); then vec(B)
    column-major; then logit-mixing; then three log precisions; then the
    three correlation-factor coordinates.
    """

    n_regions: int
    n_covariates: int

    @property
    def block(self) -> int:
        return self.n_covariates + 2

    @property
    def dim(self) -> int:
        return N_TRANSITIONS * self.block + N_TRANSITIONS * self.n_regions + 7

    def transition(self, j: int) -> slice:
        return slice(j * self.block, (j + 1) * self.block)

    @property
    def effects(self) -> slice:
        start = N_TRANSITIONS * self.block
        return slice(start, start + N_TRANSITIONS * self.n_regions)

    @property
    def gamma(self) -> int:
        return self.effects.stop

    @property
    def log_tau(self) -> slice:
        return slice(self.gamma + 1, self.gamma + 4)

    @property
    def corr_z(self) -> slice:
        return slice(self.gamma + 4, self.gamma + 7)

    @property
    def analytic_grad_indices(self) -> np.ndarray:
        """Coordinates with analytic posterior gradients (all but the 7 hypers)."""
        return np.arange(self.effects.stop)


def to_unconstrained(m: ModelState) -> np.ndarray:
    """Bijective map of a ModelState into a flat real vector."""
    layout = UnconstrainedLayout(m.n_regions, m.n_covariates)
    v = np.empty(layout.dim)
    for j, p in enumerate(m.params):
        sl = layout.transition(j)
        v[sl.start] = p.intercept
        v[sl.start + 1 : sl.stop - 1] = p.coefficients
        v[sl.stop - 1] = math.log(p.shape)
    v[layout.effects] = m.effects.vec()
    with np.errstate(divide="ignore"):
        v[layout.gamma] = logit(m.mix.gamma / GAMMA_MAX)
    v[layout.log_tau] = np.log(m.between.precisions)
    sd = 1.0 / np.sqrt(m.between.precisions)
    v[layout.corr_z] = z_from_corr(m.between.covariance() / np.outer(sd, sd))
    return v


def from_unconstrained(v: np.ndarray, n_regions: int, n_covariates: int) -> ModelState:
    """Inverse of ``to_unconstrained``; always lands inside the support."""
    layout = UnconstrainedLayout(n_regions, n_covariates)
    v = np.asarray(v, dtype=float).ravel()
    if v.size != layout.dim:
        raise DataError(f"expected vector of length {layout.dim}, got {v.size}")
    params = []
    for j in range(N_TRANSITIONS):
        sl = layout.transition(j)
        params.append(
            TransitionParams(
                shape=math.exp(v[sl.stop - 1]),
                intercept=float(v[sl.start]),
                coefficients=v[sl.start + 1 : sl.stop - 1].copy(),
            )
        )
    effects = RandomEffects(
        values=v[layout.effects].reshape((n_regions, N_TRANSITIONS), order="F")
    )
    gamma = float(GAMMA_MAX * expit(v[layout.gamma]))
    tau = np.exp(v[layout.log_tau])
    corr = corr_from_z(v[layout.corr_z])
    sd = 1.0 / np.sqrt(tau)
    between = BetweenCov.from_covariance(corr * np.outer(sd, sd))
    return ModelState(
        params=tuple(params),
        effects=effects,
        mix=LerouxMix(gamma=gamma),
        between=between,
    )


def log_abs_det_jacobian(v: np.ndarray, n_regions: int, n_covariates: int) -> float:
    """log |d(constrained)/d(unconstrained)| at ``v``.

    Constrained coordinates: shapes, effects and regression terms as-is, the
    mixing weight on its clipped domain, and the between-transition block as
    the free entries of the precision matrix.
    """
    layout = UnconstrainedLayout(n_regions, n_covariates)
    v = np.asarray(v, dtype=float).ravel()
    out = 0.0
    for j in range(N_TRANSITIONS):
        out += float(v[layout.transition(j).stop - 1])  # d shape / d log shape
    g = expit(v[layout.gamma])
    out += math.log(GAMMA_MAX) + math.log(g) + math.log1p(-g)
    x = np.tanh(v[layout.corr_z])
    log1mx2 = np.log1p(-(x**2))
    out += 2.0 * float(np.sum(v[layout.log_tau]))
    out += -2.5 * (log1mx2[0] + log1mx2[1]) - 3.0 * log1mx2[2]
    return float(out)
