"""Convergence diagnostics for multi-chain draws.

Arrays are shaped (n_chains, n_draws). Split R-hat follows the standard
between/within variance ratio on half-chains; bulk ESS rank-normalises the
pooled draws and sums paired autocorrelations with the initial monotone
positive-sequence truncation.
"""

from __future__ import annotations

import numpy as np
from scipy import stats


def _split(x: np.ndarray) -> np.ndarray:
    n = x.shape[1] // 2
    return np.concatenate([x[:, :n], x[:, n : 2 * n]], axis=0)


def split_rhat(x: np.ndarray) -> float:
    """Potential scale reduction on split chains; NaN for degenerate input."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] < 4:
        return float("nan")
    halves = _split(x)
    n = halves.shape[1]
    within = halves.var(axis=1, ddof=1).mean()
    if within == 0 or not np.isfinite(within):
        return float("nan")
    between = n * halves.mean(axis=1).var(ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def _rank_normalize(x: np.ndarray) -> np.ndarray:
    ranks = stats.rankdata(x, method="average").reshape(x.shape)
    return stats.norm.ppf((ranks - 0.375) / (x.size + 0.25))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Per-chain autocovariance via FFT, biased normalisation."""
    c, n = x.shape
    centered = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    fx = np.fft.rfft(centered, size, axis=1)
    acov = np.fft.irfft(fx * np.conjugate(fx), size, axis=1)[:, :n].real
    return acov / n


def ess_bulk(x: np.ndarray) -> float:
    """Rank-normalised bulk effective sample size; NaN for degenerate input."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] < 4:
        return float("nan")
    if np.all(x == x.ravel()[0]):
        return float("nan")
    z = _split(_rank_normalize(x))
    c, n = z.shape
    acov = _autocovariance(z)
    within = acov[:, 0].mean() * n / (n - 1)
    var_plus = within * (n - 1) / n
    if c > 1:
        var_plus += z.mean(axis=1).var(ddof=1)
    if var_plus == 0:
        return float("nan")
    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    # Geyer: sum adjacent pairs while positive, enforcing monotone decrease.
    total = 0.0
    prev = np.inf
    t = 0
    while 2 * t + 1 < n:
        pair = rho[2 * t] + rho[2 * t + 1]
        if pair <= 0:
            break
        prev = min(prev, pair)
        total += prev
        t += 1
    tau = max(-1.0 + 2.0 * total, 1e-8)
    return float(c * n / tau)


def summarize(series: dict[str, np.ndarray]):
    """Per-parameter mean/sd/quantiles plus R-hat and bulk ESS.

    ``series`` maps parameter name to a (n_chains, n_draws) array. Returns a
    pandas DataFrame in insertion order; R-hat is NaN when only one chain is
    available, and the ``degenerate`` flag marks constant chains.
    """
    import pandas as pd

    rows = []
    for name, x in series.items():
        x = np.atleast_2d(np.asarray(x, dtype=float))
        pooled = x.ravel()
        constant = bool(np.all(pooled == pooled[0])) if pooled.size else True
        rows.append(
            {
                "parameter": name,
                "mean": pooled.mean(),
                "sd": pooled.std(ddof=1) if pooled.size > 1 else 0.0,
                "q025": np.quantile(pooled, 0.025),
                "q975": np.quantile(pooled, 0.975),
                "rhat": split_rhat(x) if x.shape[0] > 1 else float("nan"),
                "ess_bulk": ess_bulk(x),
                "degenerate": constant,
            }
        )
    return pd.DataFrame(rows)
