"""Adaptive Gauss-Legendre quadrature on 15-point panels.

The integrand is evaluated on whole node vectors at once and may return extra
trailing dimensions (e.g. one value per posterior draw and region); panel
refinement is then driven by the worst error across those dimensions, so a
single pass integrates many parameter sets simultaneously.
"""

from __future__ import annotations

import numpy as np

from .exceptions import QuadratureError

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(15)


def _panel(f, a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(f(mid + half * _NODES), dtype=float)
    return half * np.tensordot(_WEIGHTS, vals, axes=(0, 0))


def adaptive_gauss_legendre(f, a: float, b: float, tol: float = 1e-8, max_depth: int = 30):
    """Integrate ``f`` over [a, b] to absolute tolerance ``tol``.

    ``f`` maps a 1-d array of nodes to an array whose first axis matches the
    nodes; the remaining axes are integrated independently. Each panel is
    accepted when the whole-panel estimate agrees with the sum of its halves
    within the panel's share of the tolerance, and the refined estimate is
    kept. Raises QuadratureError beyond ``max_depth`` bisections.
    """
    if b < a:
        raise ValueError(f"empty integration range [{a}, {b}]")
    if b == a:
        probe = np.asarray(f(np.array([a])), dtype=float)
        return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0
    whole = _panel(f, a, b)
    total = np.zeros_like(whole)
    stack = [(a, b, whole, tol, 0)]
    while stack:
        lo, hi, est, tol_here, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = _panel(f, lo, mid)
        right = _panel(f, mid, hi)
        refined = left + right
        err = np.max(np.abs(est - refined))
        if err <= tol_here or err <= 1e-15 * max(1.0, float(np.max(np.abs(refined)))):
            total = total + refined
        elif depth >= max_depth:
            raise QuadratureError(
                f"tolerance {tol_here:.3g} not reached at max depth {max_depth} "
                f"on [{lo:.6g}, {hi:.6g}] (error {err:.3g})"
            )
        else:
            stack.append((lo, mid, left, 0.5 * tol_here, depth + 1))
            stack.append((mid, hi, right, 0.5 * tol_here, depth + 1))
    return total if np.ndim(total) else float(total)
