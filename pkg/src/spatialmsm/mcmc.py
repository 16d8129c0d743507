"""Posterior sampling by adaptive Metropolis-within-Gibbs.

Update cycle per iteration:

1. one adaptive random-walk Metropolis block per transition over
   (intercept, coefficients, log shape), with proposal covariance learned
   from warmup history;
2. a sweep of per-region Metropolis updates of the effects matrix B, with
   proposals shaped by the conditional prior (between-transition covariance
   scaled by the region's spatial precision diagonal) -- only that region's
   subjects and its graph neighbours enter the ratio; then one
   likelihood-invariant recentering move per transition that shifts the
   intercept against the whole effects column, breaking their posterior
   confounding;
3. exact Gibbs for the between-transition precision matrix, conjugate
   because vec(B) is Gaussian with Kronecker precision: the conditional is
   Wishart(prior_df + K, (prior_scale^{-1} + B' Q_w B)^{-1});
4. scalar Metropolis on the logit of the Leroux mixing weight, with the
   spatial log-determinant recomputed by sparse factorisation.

Adaptation targets a configured acceptance rate during warmup and is frozen
afterwards. Each chain consumes one counter-based random stream derived from
(seed, chain index), so runs are reproducible draw-for-draw.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import sparse, stats
from scipy.special import expit, log_expit, logit

from . import diagnostics as diag
from .exceptions import ConfigError, DataError, NumericalError
from .gmrf import (
    GAMMA_MAX,
    N_TRANSITIONS,
    TRANSITIONS,
    BetweenCov,
    LerouxMix,
    PrecisionFactor,
    RandomEffects,
    joint_precision,
    log_density,
    within_precision,
)
from .graph import SpatialGraph
from .hazard import TransitionParams
from .likelihood import CohortData, ModelState, cohort_loglik, cohort_loglik_grad
from .prior import (
    PriorConfig,
    UnconstrainedLayout,
    _gaussian_logpdf,
    _shape_logpdf,
    from_unconstrained,
    log_abs_det_jacobian,
    log_prior,
    to_unconstrained,
    wishart_logpdf,
)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class SamplerConfig:
    """Chain plan plus optional conditioning hooks.

    The ``fix_*`` hooks pin a component at a given value and skip its update;
    they exist for conditional-correctness tests and conjugate toys, not for
    routine fits.
    """

    n_chains: int = 4
    n_warmup: int = 2000
    n_samples: int = 2000
    seed: int = 0
    target_accept: float = 0.35
    thin: int = 1
    fix_gamma: float | None = None
    fix_between: np.ndarray | None = None
    fix_effects: np.ndarray | None = None
    fix_transitions: tuple[TransitionParams, ...] | None = None

    def __post_init__(self):
        if min(self.n_chains, self.n_warmup, self.n_samples, self.thin) < 1:
            raise ConfigError("chain counts, warmup, samples and thin must be positive")
        if not (0.0 < self.target_accept < 1.0):
            raise ConfigError("target_accept must lie in (0, 1)")
        if self.fix_between is not None:
            object.__setattr__(self, "fix_between", np.asarray(self.fix_between, dtype=float))
        if self.fix_effects is not None:
            object.__setattr__(self, "fix_effects", np.asarray(self.fix_effects, dtype=float))


@dataclass(eq=False)
class PosteriorDraws:
    """Kept draws in reporting parameterisation, stacked (chain, draw, ...)."""

    alpha: np.ndarray        # (C, M, 3)
    beta0: np.ndarray        # (C, M, 3)
    beta: np.ndarray         # (C, M, 3, L)
    b: np.ndarray            # (C, M, K, 3)
    gamma: np.ndarray        # (C, M)
    tau: np.ndarray          # (C, M, 3)
    rho: np.ndarray          # (C, M, 3)
    log_post: np.ndarray     # (C, M)
    iterations: np.ndarray   # (M,)
    covariate_names: tuple[str, ...]
    acceptance: dict[str, np.ndarray] = field(default_factory=dict)
    seed: int = 0

    @property
    def n_chains(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_draws(self) -> int:
        return self.alpha.shape[1]

    @property
    def n_regions(self) -> int:
        return self.b.shape[2]

    def state(self, chain: int, draw: int) -> ModelState:
        params = tuple(
            TransitionParams(
                shape=float(self.alpha[chain, draw, j]),
                intercept=float(self.beta0[chain, draw, j]),
                coefficients=self.beta[chain, draw, j].copy(),
            )
            for j in range(N_TRANSITIONS)
        )
        return ModelState(
            params=params,
            effects=RandomEffects(values=self.b[chain, draw].copy()),
            mix=LerouxMix(gamma=float(self.gamma[chain, draw])),
            between=BetweenCov(
                precisions=self.tau[chain, draw].copy(),
                correlations=self.rho[chain, draw].copy(),
            ),
        )

    def scalar_series(self) -> dict[str, np.ndarray]:
        """Every reported parameter as a named (chain, draw) array."""
        out: dict[str, np.ndarray] = {}
        for j, name in enumerate(TRANSITIONS):
            out[f"alpha_{name}"] = self.alpha[:, :, j]
        for j, name in enumerate(TRANSITIONS):
            out[f"beta0_{name}"] = self.beta0[:, :, j]
        for j, name in enumerate(TRANSITIONS):
            for l, cov in enumerate(self.covariate_names):
                out[f"beta_{name}_{cov}"] = self.beta[:, :, j, l]
        out["gamma"] = self.gamma
        for j, name in enumerate(TRANSITIONS):
            out[f"tau_{name}"] = self.tau[:, :, j]
        for idx, (i, j) in enumerate(((0, 1), (0, 2), (1, 2))):
            out[f"rho_{TRANSITIONS[i]}_{TRANSITIONS[j]}"] = self.rho[:, :, idx]
        for j, name in enumerate(TRANSITIONS):
            for k in range(self.n_regions):
                out[f"b_{name}_r{k + 1}"] = self.b[:, :, k, j]
        return out

    def to_long_frame(self) -> pd.DataFrame:
        series = self.scalar_series()
        chains = np.repeat(np.arange(self.n_chains), self.n_draws)
        iters = np.tile(self.iterations, self.n_chains)
        frames = [
            pd.DataFrame(
                {"chain": chains, "iteration": iters, "parameter": name, "value": x.ravel()}
            )
            for name, x in series.items()
        ]
        return pd.concat(frames, ignore_index=True)


def log_posterior(m: ModelState, data, c: PriorConfig, g: SpatialGraph) -> float:
    """Joint log-posterior density up to a constant: likelihood + field + prior.

    Returns -inf outside the support; numerical failures on in-support states
    raise instead.
    """
    lp = log_prior(m, c)
    if lp == -np.inf:
        return -np.inf
    q = joint_precision(within_precision(g, m.mix), m.between)
    out = cohort_loglik(data, m) + log_density(m.effects, q) + lp
    if np.isnan(out):
        raise NumericalError("log-posterior evaluated to NaN inside the support")
    return float(out)


def log_posterior_grad(m: ModelState, data, c: PriorConfig, g: SpatialGraph) -> dict:
    """Analytic gradients for intercepts, coefficients, shapes and effects."""
    grad = cohort_loglik_grad(data, m)
    grad["beta0"] = grad["beta0"] - c.beta_precision * np.array([p.intercept for p in m.params])
    grad["beta"] = grad["beta"] - c.beta_precision * np.array([p.coefficients for p in m.params])
    if c.shape_prior == "lognormal":
        for j, p in enumerate(m.params):
            u = math.log(p.shape)
            grad["shape"][j] += (-1.0 - u / c.shape_sd**2) / p.shape
    else:
        eps = 1e-6
        for j, p in enumerate(m.params):
            hi = _shape_logpdf(p.shape + eps, c)
            lo = _shape_logpdf(p.shape - eps, c)
            grad["shape"][j] += (hi - lo) / (2 * eps)
    q_w = within_precision(g, m.mix)
    grad["b"] = grad["b"] - (q_w @ m.effects.values) @ m.between.precision()
    return grad


def gibbs_between_precision(
    b_values: np.ndarray, q_w: sparse.spmatrix, c: PriorConfig, rng: np.random.Generator
) -> np.ndarray:
    """One conjugate draw of the between-transition precision matrix."""
    cross = b_values.T @ (q_w @ b_values)
    cross = 0.5 * (cross + cross.T)
    prior_scale_inv = np.linalg.inv(c.wishart_scale)
    scale = np.linalg.inv(prior_scale_inv + cross)
    scale = 0.5 * (scale + scale.T)
    df = c.wishart_df + b_values.shape[0]
    return stats.wishart.rvs(df=df, scale=scale, random_state=rng)


class _AdaptiveScale:
    """Robbins-Monro step-size adaptation toward a target acceptance rate."""

    def __init__(self, init: float, target: float):
        self.log_s = math.log(init)
        self.target = target
        self.t = 0

    def update(self, accept_prob: float):
        self.t += 1
        self.log_s += (accept_prob - self.target) / self.t**0.6

    @property
    def scale(self) -> float:
        return math.exp(self.log_s)


def _proposal_chol_from_info(info: np.ndarray) -> np.ndarray:
    """Cholesky factor of the inverse of an information matrix, regularised
    to positive definiteness; proposals drawn with it track the local
    curvature, including the intercept/shape ridge."""
    info = 0.5 * (info + info.T)
    eigmin = float(np.linalg.eigvalsh(info).min())
    if eigmin < 1e-8:
        info = info + (1e-8 - eigmin) * np.eye(info.shape[0])
    return np.linalg.cholesky(np.linalg.inv(info))


class _TransitionData:
    """Per-transition exposure arrays and sufficient statistics."""

    def __init__(self, cohort: CohortData, j: int, n_regions: int):
        t, log_t, events, x, region = cohort.exposure(j)
        self.t = t
        self.log_t = log_t
        self.d = events.astype(float)
        self.x = x
        self.region = region
        self.n_events = float(self.d.sum())
        self.sum_d_logt = float(self.d @ log_t) if t.size else 0.0
        self.d_region = np.bincount(region, weights=self.d, minlength=n_regions)

    def linear_predictor(self, beta0: float, beta: np.ndarray) -> np.ndarray:
        return beta0 + (self.x @ beta if self.x.size else np.zeros(self.t.size))

    def region_cum_weights(self, lp: np.ndarray, shape: float, n_regions: int) -> np.ndarray:
        """Per-region sums of exp(lp) * t**shape (effects excluded)."""
        if self.t.size == 0:
            return np.zeros(n_regions)
        w = np.exp(lp + shape * self.log_t)
        return np.bincount(self.region, weights=w, minlength=n_regions)

    def event_part(self, lp: np.ndarray, shape: float) -> float:
        """Sum over events of log h without the region effect."""
        if self.t.size == 0:
            return 0.0
        return (
            self.n_events * math.log(shape)
            + float(self.d @ lp)
            + (shape - 1.0) * self.sum_d_logt
        )

    def block_information(
        self, lp: np.ndarray, b_col: np.ndarray, shape: float, prior_precision: float
    ) -> np.ndarray:
        """Observed information for (intercept, coefficients, log shape).

        Negative Hessian of the transition log-likelihood at the current
        state plus the prior precisions; used to precondition the block
        proposal.
        """
        dim = self.x.shape[1] + 2 if self.x.ndim == 2 else 2
        info = np.zeros((dim, dim))
        if self.t.size:
            w = np.exp(lp + b_col[self.region] + shape * self.log_t)
            z = np.column_stack([np.ones(self.t.size), self.x])
            zw = z * w[:, None]
            info[:-1, :-1] = z.T @ zw
            info[:-1, -1] = info[-1, :-1] = shape * (zw.T @ self.log_t)
            info[-1, -1] = shape * float((w - self.d) @ self.log_t) + shape**2 * float(
                w @ self.log_t**2
            )
        info[:-1, :-1] += prior_precision * np.eye(dim - 1)
        info[-1, -1] += 1.0  # unit-information floor for the log-shape prior
        return info


def _shape_block_logprior(beta0: float, beta: np.ndarray, shape: float, c: PriorConfig) -> float:
    out = _gaussian_logpdf(beta0, c.beta_precision)
    for v in beta:
        out += _gaussian_logpdf(float(v), c.beta_precision)
    # Density over log-shape: prior density in shape plus the log Jacobian.
    return out + _shape_logpdf(shape, c) + math.log(shape)


def _run_chain(args) -> dict:
    (chain_idx, cohort, graph, pc, sc, n_covariates) = args
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([sc.seed, chain_idx])))
    K = graph.n_regions
    L = n_covariates
    lap = graph.laplacian().tocsr()
    degrees = graph.degrees.astype(float)
    neighbors = [graph.neighbors(k) for k in range(K)]
    trans = [_TransitionData(cohort, j, K) for j in range(N_TRANSITIONS)]

    # --- initial state -----------------------------------------------------
    if sc.fix_transitions is not None:
        beta0 = np.array([p.intercept for p in sc.fix_transitions])
        beta = np.array([p.coefficients for p in sc.fix_transitions]).reshape(N_TRANSITIONS, L)
        shape = np.array([p.shape for p in sc.fix_transitions])
    else:
        beta0 = np.zeros(N_TRANSITIONS)
        beta = np.zeros((N_TRANSITIONS, L))
        shape = np.ones(N_TRANSITIONS)
    if sc.fix_effects is None:
        B = np.zeros((K, N_TRANSITIONS))
    else:
        if sc.fix_effects.shape != (K, N_TRANSITIONS):
            raise ConfigError(f"fix_effects must have shape ({K}, 3)")
        B = sc.fix_effects.copy()
    gamma = 0.5 if sc.fix_gamma is None else float(sc.fix_gamma)
    if not (0.0 <= gamma <= GAMMA_MAX):
        raise ConfigError(f"fixed gamma {gamma} outside [0, {GAMMA_MAX}]")
    v_gamma = float(logit(max(gamma, 1e-12) / GAMMA_MAX))
    if sc.fix_between is None:
        P = np.eye(N_TRANSITIONS)
    else:
        P = np.linalg.inv(sc.fix_between)
    prior_scale_inv = np.linalg.inv(pc.wishart_scale)

    lp = [trans[j].linear_predictor(beta0[j], beta[j]) for j in range(N_TRANSITIONS)]
    A = np.column_stack(
        [trans[j].region_cum_weights(lp[j], shape[j], K) for j in range(N_TRANSITIONS)]
    )
    ev_base = np.array([trans[j].event_part(lp[j], shape[j]) for j in range(N_TRANSITIONS)])
    ev_effects = np.array([trans[j].d_region @ B[:, j] for j in range(N_TRANSITIONS)])
    ll = ev_base + ev_effects - np.einsum("kj,kj->j", np.exp(B), A)
    if not np.all(np.isfinite(ll)):
        raise NumericalError("log-likelihood nonfinite at initialization")
    block_prior = np.array(
        [_shape_block_logprior(beta0[j], beta[j], shape[j], pc) for j in range(N_TRANSITIONS)]
    )
    logdet_qw = PrecisionFactor(within_precision(graph, LerouxMix(gamma))).logdet
    q_diag = (1.0 - gamma) + gamma * degrees

    # --- adaptation state ---------------------------------------------------
    dim_block = L + 2
    block_scales = [_AdaptiveScale(1.0, sc.target_accept) for _ in range(3)]
    block_chol = [
        _proposal_chol_from_info(
            trans[j].block_information(lp[j], B[:, j], shape[j], pc.beta_precision)
        )
        for j in range(N_TRANSITIONS)
    ]
    effect_scales = [_AdaptiveScale(1.0, sc.target_accept) for _ in range(K)]
    recenter_scales = [_AdaptiveScale(0.3, sc.target_accept) for _ in range(3)]
    gamma_scale = _AdaptiveScale(0.5, sc.target_accept)
    chol_between_cov = np.linalg.cholesky(np.linalg.inv(P))

    n_kept = sc.n_samples
    total_iters = sc.n_warmup + sc.n_samples * sc.thin
    out = {
        "alpha": np.empty((n_kept, N_TRANSITIONS)),
        "beta0": np.empty((n_kept, N_TRANSITIONS)),
        "beta": np.empty((n_kept, N_TRANSITIONS, L)),
        "b": np.empty((n_kept, K, N_TRANSITIONS)),
        "gamma": np.empty(n_kept),
        "tau": np.empty((n_kept, N_TRANSITIONS)),
        "rho": np.empty((n_kept, N_TRANSITIONS)),
        "log_post": np.empty(n_kept),
    }
    accept_counts = {"transitions": 0.0, "effects": 0.0, "gamma": 0.0}
    warmup_accepts = {"transitions": 0.0, "effects": 0.0, "gamma": 0.0}
    post_warmup_iters = 0
    kept = 0

    for it in range(total_iters):
        warming = it < sc.n_warmup
        if it == sc.n_warmup:
            stalled = [
                name
                for name, active in (
                    ("transitions", sc.fix_transitions is None),
                    ("effects", sc.fix_effects is None),
                    ("gamma", sc.fix_gamma is None),
                )
                if active and warmup_accepts[name] == 0.0
            ]
            if stalled:
                steps = {
                    "transitions": [s.scale for s in block_scales],
                    "effects": [s.scale for s in effect_scales],
                    "gamma": [gamma_scale.scale],
                }
                raise NumericalError(
                    f"zero acceptance across warmup for {stalled}; "
                    f"last step sizes: { {k: steps[k] for k in stalled} }"
                )

        # (1) per-transition blocks
        if sc.fix_transitions is None:
            for j in range(N_TRANSITIONS):
                cur = np.concatenate([[beta0[j]], beta[j], [math.log(shape[j])]])
                step = block_scales[j].scale * (block_chol[j] @ rng.standard_normal(dim_block))
                prop = cur + step
                b0_new, beta_new, shape_new = prop[0], prop[1:-1], math.exp(prop[-1])
                lp_new = trans[j].linear_predictor(b0_new, beta_new)
                a_new = trans[j].region_cum_weights(lp_new, shape_new, K)
                ll_new = (
                    trans[j].event_part(lp_new, shape_new)
                    + ev_effects[j]
                    - float(np.exp(B[:, j]) @ a_new)
                )
                prior_new = _shape_block_logprior(b0_new, beta_new, shape_new, pc)
                log_ratio = (ll_new + prior_new) - (ll[j] + block_prior[j])
                acc = min(1.0, math.exp(min(log_ratio, 0.0))) if np.isfinite(log_ratio) else 0.0
                if rng.random() < acc:
                    beta0[j], beta[j], shape[j] = b0_new, beta_new, shape_new
                    lp[j], ll[j], block_prior[j] = lp_new, ll_new, prior_new
                    A[:, j] = a_new
                    if warming:
                        warmup_accepts["transitions"] += 1.0
                    else:
                        accept_counts["transitions"] += 1.0
                if warming:
                    block_scales[j].update(acc)
                    # Re-precondition on the local curvature as the chain moves.
                    if (it + 1) % 25 == 0:
                        block_chol[j] = _proposal_chol_from_info(
                            trans[j].block_information(lp[j], B[:, j], shape[j], pc.beta_precision)
                        )

        # (2) effects sweep
        if sc.fix_effects is None:
            exp_B = np.exp(B)
            for k in range(K):
                z = rng.standard_normal(N_TRANSITIONS)
                delta = (
                    effect_scales[k].scale / math.sqrt(q_diag[k])
                ) * (chol_between_cov @ z)
                b_new = B[k] + delta
                exp_new = np.exp(b_new)
                d_ll = float(
                    trans[0].d_region[k] * delta[0]
                    + trans[1].d_region[k] * delta[1]
                    + trans[2].d_region[k] * delta[2]
                    - (exp_new - exp_B[k]) @ A[k]
                )
                nb = neighbors[k]
                s_k = -gamma * B[nb].sum(axis=0) if nb.size else np.zeros(N_TRANSITIONS)
                d_prior = -0.5 * q_diag[k] * float(b_new @ P @ b_new - B[k] @ P @ B[k])
                d_prior -= float((b_new - B[k]) @ P @ s_k)
                log_ratio = d_ll + d_prior
                acc = min(1.0, math.exp(min(log_ratio, 0.0))) if np.isfinite(log_ratio) else 0.0
                if rng.random() < acc:
                    for j in range(N_TRANSITIONS):
                        ev_effects[j] += trans[j].d_region[k] * delta[j]
                        ll[j] += trans[j].d_region[k] * delta[j] - (exp_new[j] - exp_B[k, j]) * A[k, j]
                    B[k] = b_new
                    exp_B[k] = exp_new
                    if warming:
                        warmup_accepts["effects"] += 1.0 / K
                    else:
                        accept_counts["effects"] += 1.0 / K
                if warming:
                    effect_scales[k].update(acc)

        # (2b) intercept/effects recentering: eta is invariant under
        # (beta0_j, B[:, j]) -> (beta0_j + d, B[:, j] - d), so the ratio only
        # involves the field density and the intercept prior. Row sums of the
        # Laplacian vanish, leaving 1'Q_w t = (1 - gamma) sum(t).
        if sc.fix_effects is None and sc.fix_transitions is None:
            for j in range(N_TRANSITIONS):
                d = recenter_scales[j].scale * rng.standard_normal()
                col_sums = B.sum(axis=0)
                quad_delta = (1.0 - gamma) * (
                    -2.0 * d * float(P[j] @ col_sums) + d * d * K * P[j, j]
                )
                prior_delta = _gaussian_logpdf(beta0[j] + d, pc.beta_precision) - _gaussian_logpdf(
                    beta0[j], pc.beta_precision
                )
                log_ratio = -0.5 * quad_delta + prior_delta
                acc = min(1.0, math.exp(min(log_ratio, 0.0))) if np.isfinite(log_ratio) else 0.0
                if rng.random() < acc:
                    beta0[j] += d
                    B[:, j] -= d
                    lp[j] = lp[j] + d
                    A[:, j] *= math.exp(d)
                    ev_effects[j] -= d * trans[j].n_events
                    block_prior[j] = _shape_block_logprior(beta0[j], beta[j], shape[j], pc)
                if warming:
                    recenter_scales[j].update(acc)

        btb = B.T @ B
        btlb = B.T @ (lap @ B)
        btb = 0.5 * (btb + btb.T)
        btlb = 0.5 * (btlb + btlb.T)

        # (3) conjugate between-transition precision
        if sc.fix_between is None:
            cross = (1.0 - gamma) * btb + gamma * btlb
            scale = np.linalg.inv(prior_scale_inv + cross)
            P = stats.wishart.rvs(
                df=pc.wishart_df + K, scale=0.5 * (scale + scale.T), random_state=rng
            )
            chol_between_cov = np.linalg.cholesky(np.linalg.inv(P))

        # (4) mixing weight
        if sc.fix_gamma is None:
            g0 = float(np.sum(P * btb))
            g1 = float(np.sum(P * btlb))
            v_new = v_gamma + gamma_scale.scale * rng.standard_normal()
            gamma_new = float(GAMMA_MAX * expit(v_new))
            logdet_new = PrecisionFactor(
                within_precision(graph, LerouxMix(gamma_new))
            ).logdet
            quad_old = (1.0 - gamma) * g0 + gamma * g1
            quad_new = (1.0 - gamma_new) * g0 + gamma_new * g1
            log_ratio = (
                1.5 * (logdet_new - logdet_qw)
                - 0.5 * (quad_new - quad_old)
                + (log_expit(v_new) + log_expit(-v_new))
                - (log_expit(v_gamma) + log_expit(-v_gamma))
            )
            acc = min(1.0, math.exp(min(log_ratio, 0.0))) if np.isfinite(log_ratio) else 0.0
            if rng.random() < acc:
                v_gamma, gamma, logdet_qw = v_new, gamma_new, logdet_new
                q_diag = (1.0 - gamma) + gamma * degrees
                if warming:
                    warmup_accepts["gamma"] += 1.0
                else:
                    accept_counts["gamma"] += 1.0
            if warming:
                gamma_scale.update(acc)

        if not warming:
            post_warmup_iters += 1
            if post_warmup_iters % sc.thin == 0:
                cov_between = np.linalg.inv(P)
                sd = np.sqrt(np.diag(cov_between))
                sign, logdet_p = np.linalg.slogdet(P)
                quad = (1.0 - gamma) * float(np.sum(P * btb)) + gamma * float(np.sum(P * btlb))
                field_ld = (
                    -0.5 * N_TRANSITIONS * K * _LOG_2PI
                    + 0.5 * (K * logdet_p + N_TRANSITIONS * logdet_qw)
                    - 0.5 * quad
                )
                log_post = (
                    float(ll.sum())
                    + field_ld
                    + float(block_prior.sum())
                    - float(np.log(shape).sum())  # block prior carries the log-shape Jacobian
                    + wishart_logpdf(P, pc.wishart_df, pc.wishart_scale)
                )
                out["alpha"][kept] = shape
                out["beta0"][kept] = beta0
                out["beta"][kept] = beta
                out["b"][kept] = B
                out["gamma"][kept] = gamma
                out["tau"][kept] = 1.0 / np.diag(cov_between)
                out["rho"][kept] = np.array(
                    [
                        cov_between[0, 1] / (sd[0] * sd[1]),
                        cov_between[0, 2] / (sd[0] * sd[2]),
                        cov_between[1, 2] / (sd[1] * sd[2]),
                    ]
                )
                out["log_post"][kept] = log_post
                kept += 1

    denom = max(post_warmup_iters, 1)
    out["accept"] = {
        "transitions": accept_counts["transitions"] / (denom * N_TRANSITIONS),
        "effects": accept_counts["effects"] / denom,
        "gamma": accept_counts["gamma"] / denom,
    }
    return out


def run(
    data,
    g: SpatialGraph,
    pc: PriorConfig,
    sc: SamplerConfig,
    covariate_names: tuple[str, ...] | None = None,
    threads: int = 1,
) -> PosteriorDraws:
    """Sample the joint posterior; deterministic per (seed, chain index)."""
    cohort = data if isinstance(data, CohortData) else CohortData.from_subjects(list(data))
    if cohort.n and cohort.region.max() >= g.n_regions:
        raise DataError(
            f"cohort references region {cohort.region.max() + 1} beyond K={g.n_regions}"
        )
    L = cohort.n_covariates
    if covariate_names is None:
        covariate_names = tuple(f"x{i + 1}" for i in range(L))
    if len(covariate_names) != L:
        raise ConfigError("covariate_names length must match the cohort's arity")

    jobs = [(ci, cohort, g, pc, sc, L) for ci in range(sc.n_chains)]
    if threads > 1 and sc.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, sc.n_chains)) as pool:
            results = list(pool.map(_run_chain, jobs))
    else:
        results = [_run_chain(job) for job in jobs]

    def _stack(key):
        return np.stack([r[key] for r in results])

    iterations = sc.n_warmup + sc.thin * (np.arange(sc.n_samples) + 1)
    acceptance = {
        key: np.array([r["accept"][key] for r in results])
        for key in ("transitions", "effects", "gamma")
    }
    return PosteriorDraws(
        alpha=_stack("alpha"),
        beta0=_stack("beta0"),
        beta=_stack("beta"),
        b=_stack("b"),
        gamma=_stack("gamma"),
        tau=_stack("tau"),
        rho=_stack("rho"),
        log_post=_stack("log_post"),
        iterations=iterations,
        covariate_names=tuple(covariate_names),
        acceptance=acceptance,
        seed=sc.seed,
    )


def diagnostics(d: PosteriorDraws) -> pd.DataFrame:
    """Split R-hat, bulk ESS and posterior summaries for every parameter."""
    if d.n_chains < 2:
        warnings.warn("single chain: split R-hat omitted", stacklevel=2)
    table = diag.summarize(d.scalar_series())
    table.attrs["acceptance"] = {k: v.tolist() for k, v in d.acceptance.items()}
    return table


def map_estimate(
    data,
    g: SpatialGraph,
    pc: PriorConfig,
    max_iter: int = 1000,
    grad_tol: float = 1e-5,
    fix_gamma: float | None = None,
    fix_between: np.ndarray | None = None,
) -> ModelState:
    """Posterior mode in unconstrained coordinates by quasi-Newton ascent.

    Gradients are analytic for intercepts, coefficients, shapes and effects;
    the seven hyperparameter coordinates use central differences (they are
    dropped entirely when fixed). Raises NumericalError if the analytic
    gradient at the optimum exceeds ``grad_tol`` in max-norm.
    """
    from scipy import optimize

    from .prior import z_from_corr

    cohort = data if isinstance(data, CohortData) else CohortData.from_subjects(list(data))
    K, L = g.n_regions, cohort.n_covariates
    layout = UnconstrainedLayout(K, L)
    v0 = np.zeros(layout.dim)
    if fix_gamma is not None:
        v0[layout.gamma] = float(logit(max(fix_gamma, 1e-12) / GAMMA_MAX))
    if fix_between is not None:
        between0 = BetweenCov.from_covariance(fix_between)
        v0[layout.log_tau] = np.log(between0.precisions)
        sd = 1.0 / np.sqrt(between0.precisions)
        v0[layout.corr_z] = z_from_corr(between0.covariance() / np.outer(sd, sd))

    fixed = np.zeros(layout.dim, dtype=bool)
    if fix_gamma is not None:
        fixed[layout.gamma] = True
    if fix_between is not None:
        fixed[layout.log_tau] = True
        fixed[layout.corr_z] = True
    free = np.flatnonzero(~fixed)
    hyper_coords = [
        i
        for i in ([layout.gamma] + list(range(*layout.log_tau.indices(layout.dim)))
                  + list(range(*layout.corr_z.indices(layout.dim))))
        if not fixed[i]
    ]
    analytic = layout.analytic_grad_indices

    def objective(v_free):
        v = v0.copy()
        v[free] = v_free
        m = from_unconstrained(v, K, L)
        val = log_posterior(m, cohort, pc, g) + log_abs_det_jacobian(v, K, L)
        return -val if np.isfinite(val) else 1e300

    def gradient_full(v):
        m = from_unconstrained(v, K, L)
        parts = log_posterior_grad(m, cohort, pc, g)
        grad = np.zeros(layout.dim)
        for j in range(N_TRANSITIONS):
            sl = layout.transition(j)
            grad[sl.start] = parts["beta0"][j]
            grad[sl.start + 1 : sl.stop - 1] = parts["beta"][j]
            # chain rule to log-shape, plus its Jacobian term in the objective
            grad[sl.stop - 1] = parts["shape"][j] * m.params[j].shape + 1.0
        grad[layout.effects] = parts["b"].ravel(order="F")
        base = -objective(v[free])
        step = 1e-5
        for i in hyper_coords:
            vp = v.copy()
            vp[i] += step
            vm = v.copy()
            vm[i] -= step
            grad[i] = (-objective(vp[free]) + objective(vm[free])) / (2 * step)
        return grad, base

    def fun_and_jac(v_free):
        v = v0.copy()
        v[free] = v_free
        grad, value = gradient_full(v)
        return -value, -grad[free]

    res = optimize.minimize(
        fun_and_jac,
        v0[free],
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": max_iter, "ftol": 1e-14, "gtol": 1e-9},
    )
    v_opt = v0.copy()
    v_opt[free] = res.x
    grad, _ = gradient_full(v_opt)
    worst = np.max(np.abs(grad[np.intersect1d(analytic, free)])) if free.size else 0.0
    if worst > grad_tol:
        raise NumericalError(
            f"MAP did not converge within {max_iter} iterations "
            f"(analytic gradient max-norm {worst:.3g} > {grad_tol})"
        )
    return from_unconstrained(v_opt, K, L)
