"""Multivariate Leroux random-effects model.

Region-by-transition effects form a K x 3 matrix B whose vectorisation
(column-major: all K effects of transition 12, then 13, then 23) is a
zero-mean Gaussian Markov random field. The precision separates into a
Kronecker product:

    Prec(vec(B)) = P_between (3x3)  (x)  Q_w (KxK),

where Q_w = (1-gamma) I + gamma (D - W) mixes an independent scenario
(gamma=0) with the intrinsic CAR structure (gamma -> 1), and P_between is the
inverse of the between-transition covariance. The spatial dispersion
multiplier on Q_w is fixed to 1 for identifiability; the between-transition
covariance carries all dispersion.

gamma lives on [0, 1 - GAMMA_EPS]: at gamma = 1 the precision is the singular
intrinsic-CAR matrix, and the clipped domain keeps every density proper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve_triangular

from .exceptions import DataError, NotPositiveDefiniteError
from .graph import SpatialGraph

GAMMA_EPS = 1e-6
GAMMA_MAX = 1.0 - GAMMA_EPS

N_TRANSITIONS = 3
TRANSITIONS = ("12", "13", "23")
TRANSITION_PAIRS = ((0, 1), (0, 2), (1, 2))  # order of the correlation entries


@dataclass(frozen=True, eq=False)
class RandomEffects:
    """K x 3 matrix of region-by-transition log hazard-ratio effects."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != N_TRANSITIONS:
            raise DataError(f"random effects must be K x 3, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("random effects must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_regions(self) -> int:
        return self.values.shape[0]

    def vec(self) -> np.ndarray:
        """Column-major vectorisation matching the joint precision ordering."""
        return self.values.ravel(order="F")


@dataclass(frozen=True)
class LerouxMix:
    """Mixing weight between independent and intrinsic-CAR precision."""

    gamma: float

    def __post_init__(self):
        if not (0.0 <= self.gamma <= GAMMA_MAX):
            raise DataError(f"gamma must lie in [0, {GAMMA_MAX}], got {self.gamma}")


@dataclass(frozen=True, eq=False)
class BetweenCov:
    """Between-transition covariance in its reporting parameterisation.

    ``precisions`` are the marginal precisions (tau_12, tau_13, tau_23) and
    ``correlations`` the pairwise correlations ordered as TRANSITION_PAIRS.
    Pairwise bounds do not guarantee a valid 3x3 matrix, so validity is the
    smallest eigenvalue of the implied covariance, exposed via
    ``is_positive_definite``.
    """

    precisions: np.ndarray
    correlations: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.precisions, dtype=float).ravel()
        r = np.asarray(self.correlations, dtype=float).ravel()
        if p.size != N_TRANSITIONS or r.size != N_TRANSITIONS:
            raise DataError("BetweenCov needs 3 precisions and 3 correlations")
        object.__setattr__(self, "precisions", p)
        object.__setattr__(self, "correlations", r)

    def covariance(self) -> np.ndarray:
        """The implied 3x3 covariance matrix."""
        sd = 1.0 / np.sqrt(self.precisions)
        cov = np.diag(sd**2)
        for (i, j), rho in zip(TRANSITION_PAIRS, self.correlations):
            cov[i, j] = cov[j, i] = rho * sd[i] * sd[j]
        return cov

    def precision(self) -> np.ndarray:
        cov = self.covariance()
        if not self.is_positive_definite:
            raise NotPositiveDefiniteError(
                "between-transition covariance is not positive definite"
            )
        return np.linalg.inv(cov)

    @property
    def is_positive_definite(self) -> bool:
        if np.any(self.precisions <= 0) or np.any(np.abs(self.correlations) >= 1):
            return False
        return float(np.linalg.eigvalsh(self.covariance()).min()) > 0.0

    @classmethod
    def from_covariance(cls, cov: np.ndarray) -> "BetweenCov":
        cov = np.asarray(cov, dtype=float)
        var = np.diag(cov)
        if np.any(var <= 0):
            raise NotPositiveDefiniteError("covariance has nonpositive variances")
        rho = np.array([cov[i, j] / np.sqrt(var[i] * var[j]) for i, j in TRANSITION_PAIRS])
        return cls(precisions=1.0 / var, correlations=rho)

    @classmethod
    def from_precision_matrix(cls, prec: np.ndarray) -> "BetweenCov":
        return cls.from_covariance(np.linalg.inv(np.asarray(prec, dtype=float)))


def within_precision(g: SpatialGraph, mix: LerouxMix) -> sparse.csc_matrix:
    """Spatial precision Q_w = (1-gamma) I + gamma (D - W), unit dispersion.

    Positive definite for every gamma in the clipped domain: the Laplacian
    D - W is positive semi-definite, so the smallest eigenvalue is at least
    1 - gamma > 0, on connected and disconnected graphs alike.
    """
    gamma = mix.gamma  # LerouxMix already validated the bounds
    eye = sparse.identity(g.n_regions, format="csc")
    return ((1.0 - gamma) * eye + gamma * g.laplacian()).tocsc()


def joint_precision(q_w: sparse.spmatrix, cov: BetweenCov) -> sparse.csc_matrix:
    """Kronecker precision P_between (x) Q_w in vec(B) (column-major) order."""
    return sparse.kron(cov.precision(), q_w, format="csc")


class PrecisionFactor:
    """Sparse LDL' factorisation of a symmetric positive-definite matrix.

    Uses SuperLU in symmetric mode with natural ordering and diagonal
    pivoting disabled, which on an SPD matrix yields A = L diag(d) L' with
    unit lower-triangular L. Provides the log-determinant and zero-mean
    Gaussian sampling with covariance A^{-1}.
    """

    def __init__(self, q: sparse.spmatrix):
        q = sparse.csc_matrix(q)
        if q.shape[0] != q.shape[1]:
            raise DataError(f"precision matrix must be square, got {q.shape}")
        try:
            lu = splu(
                q,
                permc_spec="NATURAL",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:  # singular factorisation
            raise NotPositiveDefiniteError(f"sparse factorisation failed: {exc}") from exc
        d = lu.U.diagonal()
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise NotPositiveDefiniteError("matrix is not positive definite")
        self.n = q.shape[0]
        self._lt = sparse.csr_matrix(lu.L.T)
        self._sqrt_d = np.sqrt(d)
        self.logdet = float(np.sum(np.log(d)))

    def sample_zero_mean(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draws x ~ N(0, A^{-1}) by solving L' x = z / sqrt(d).

        Returns shape (n,) for size None, else (size, n).
        """
        if size is None:
            z = rng.standard_normal(self.n)
            return spsolve_triangular(self._lt, z / self._sqrt_d, lower=False)
        z = rng.standard_normal((self.n, size))
        out = spsolve_triangular(self._lt, z / self._sqrt_d[:, None], lower=False)
        return out.T


def log_density(b, q: sparse.spmatrix) -> float:
    """Gaussian log-density of the effects under sparse precision ``q``.

    -(3K/2) log 2pi + 1/2 logdet(q) - 1/2 vec(B)' q vec(B), with the
    log-determinant from the sparse symmetric factorisation.
    """
    v = b.vec() if isinstance(b, RandomEffects) else np.asarray(b, dtype=float).ravel()
    if v.size != q.shape[0]:
        raise DataError(f"effects length {v.size} does not match precision {q.shape}")
    factor = PrecisionFactor(q)
    quad = float(v @ (q @ v))
    return -0.5 * v.size * np.log(2.0 * np.pi) + 0.5 * factor.logdet - 0.5 * quad


def sample(q: sparse.spmatrix, seed: int) -> RandomEffects:
    """Draw vec(B) ~ N(0, q^{-1}) and reshape to K x 3; deterministic in seed."""
    n = q.shape[0]
    if n % N_TRANSITIONS != 0:
        raise DataError(f"joint precision size {n} is not a multiple of 3")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    vec = PrecisionFactor(q).sample_zero_mean(rng)
    return RandomEffects(values=vec.reshape((n // N_TRANSITIONS, N_TRANSITIONS), order="F"))
